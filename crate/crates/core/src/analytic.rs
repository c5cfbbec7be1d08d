//! Quasiparticle dispersion of the XY chain and the butterfly velocity as the largest group
//! velocity.
//!
//! After the Jordan-Wigner and Bogoliubov transformations the chain is a set of free
//! fermion modes with energy `eps(k) = -2J sqrt((h - cos k)^2 + r^2 sin^2 k)`. The group
//! velocity `d eps / dk` is odd in `k`, so the butterfly velocity is the maximum of
//! `|v_g|` over `k in [0, pi]`.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

/// Momentum offset used to take limits at gap-closing points.
pub const LIMIT_OFFSET: f64 = 1e-6;
/// Grid resolution for the numeric maximisation over `[0, pi]`.
pub const GRID_POINTS: usize = 4096;
const REFINE_TOL: f64 = 1e-10;
const GAP_EPS: f64 = 1e-12;

/// Reduce a momentum into `[-pi, pi]`.
pub fn reduce_momentum(k: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut k = k % two_pi;
    if k > PI {
        k -= two_pi;
    } else if k < -PI {
        k += two_pi;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionParams {
    pub j: f64,
    pub r: f64,
    pub h: f64,
    /// Crystal momentum in `[-pi, pi]` (lattice spacing 1).
    pub k: f64,
}

impl DispersionParams {
    pub fn new(k: f64, j: f64, r: f64, h: f64) -> Self {
        Self { j, r, h, k: reduce_momentum(k) }
    }

    pub fn energy(&self) -> f64 {
        dispersion(self.k, self.j, self.r, self.h)
    }

    pub fn group_velocity(&self) -> GroupVelocity {
        group_velocity(self.k, self.j, self.r, self.h)
    }
}

fn gap(k: f64, r: f64, h: f64) -> f64 {
    let (s, c) = k.sin_cos();
    ((h - c) * (h - c) + r * r * s * s).sqrt()
}

pub fn dispersion(k: f64, j: f64, r: f64, h: f64) -> f64 {
    -2.0 * j * gap(k, r, h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupVelocity {
    pub value: f64,
    /// Set when the closed form is 0/0 at `k` and `value` is the larger one-sided limit.
    pub is_limit: bool,
}

fn group_velocity_raw(k: f64, j: f64, r: f64, h: f64) -> Option<f64> {
    let den = gap(k, r, h);
    if den <= GAP_EPS {
        return None;
    }
    let (s, c) = k.sin_cos();
    Some(-2.0 * j * (s * (h - c) + r * r * s * c) / den)
}

pub fn group_velocity(k: f64, j: f64, r: f64, h: f64) -> GroupVelocity {
    match group_velocity_raw(k, j, r, h) {
        Some(value) => GroupVelocity { value, is_limit: false },
        None => {
            let sides = [k - LIMIT_OFFSET, k + LIMIT_OFFSET]
                .map(|kk| group_velocity_raw(kk, j, r, h).unwrap_or(0.0));
            let value = if sides[0].abs() >= sides[1].abs() { sides[0] } else { sides[1] };
            GroupVelocity { value, is_limit: true }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityMethod {
    ClosedForm,
    GridRefine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityResult {
    pub v_b: f64,
    pub k_star: f64,
    pub method: VelocityMethod,
}

fn speed(k: f64, j: f64, r: f64, h: f64) -> f64 {
    group_velocity(k, j, r, h).value.abs()
}

pub fn butterfly_velocity(j: f64, r: f64, h: f64) -> VelocityResult {
    let scale = 2.0 * j.abs();
    if r == 0.0 {
        // |v_g| = 2|J| sin k wherever it is defined, for every h.
        return VelocityResult { v_b: scale, k_star: PI / 2.0, method: VelocityMethod::ClosedForm };
    }
    if r.abs() == 1.0 {
        // Transverse-field Ising: eps = -2J sqrt(1 + h^2 - 2h cos k).
        let (v_b, k_star) = if h.abs() <= 1.0 {
            (scale * h.abs(), h.acos())
        } else {
            (scale, (1.0 / h).acos())
        };
        return VelocityResult { v_b, k_star, method: VelocityMethod::ClosedForm };
    }
    grid_refine(j, r, h)
}

fn grid_refine(j: f64, r: f64, h: f64) -> VelocityResult {
    let step = PI / (GRID_POINTS - 1) as f64;
    let grid_k = |i: usize| if i == GRID_POINTS - 1 { PI } else { i as f64 * step };
    let (best_i, best_v) = (0..GRID_POINTS)
        .map(|i| (i, speed(grid_k(i), j, r, h)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let lo = grid_k(best_i.saturating_sub(1));
    let hi = grid_k((best_i + 1).min(GRID_POINTS - 1));
    let (k_ref, v_ref) = golden_max(|k| speed(k, j, r, h), lo, hi);
    let (v_b, k_star) = if v_ref >= best_v { (v_ref, k_ref) } else { (best_v, grid_k(best_i)) };
    VelocityResult { v_b, k_star, method: VelocityMethod::GridRefine }
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > REFINE_TOL {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let k = 0.5 * (lo + hi);
    (k, f(k))
}

/// Butterfly velocities on an `(r, h)` grid; row `a`, column `b` holds `v_B(r[a], h[b])`.
pub fn vb_sweep(r_grid: &[f64], h_grid: &[f64], j: f64) -> Vec<Vec<f64>> {
    r_grid
        .iter()
        .map(|&r| h_grid.iter().map(|&h| butterfly_velocity(j, r, h).v_b).collect())
        .collect()
}

/// Sorted many-body spectrum of the periodic `n`-site chain assembled from the free-fermion
/// modes.
///
/// The Jordan-Wigner string turns the wrap-around bond into an antiperiodic fermion bond in
/// the even-parity sector (`k = 2 pi (m + 1/2) / n`) and a periodic one in the odd sector
/// (`k = 2 pi m / n`). A pair `(k, -k)` with `0 < k < pi` contributes
/// `xi_k + {-|eps(k)|, 0, 0, +|eps(k)|}` with `xi_k = -2J (h - cos k)`, the outer two being
/// even in fermion number. Self-conjugate momenta `k = 0, pi` are unpaired and add `xi_k`
/// when occupied. Each sector keeps only the states of its own parity.
pub fn many_body_spectrum(j: f64, r: f64, h: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "periodic chain needs at least two sites");
    let mut levels = Vec::with_capacity(1 << n);
    for odd_sector in [false, true] {
        let shift = if odd_sector { 0.0 } else { 0.5 };
        let momenta: Vec<f64> =
            (0..n).map(|m| reduce_momentum(2.0 * PI * (m as f64 + shift) / n as f64)).collect();
        let xi = |k: f64| -2.0 * j * (h - k.cos());
        let mut paired = Vec::new();
        let mut unpaired = Vec::new();
        for &k in &momenta {
            if k.sin().abs() < 1e-12 {
                unpaired.push(xi(k));
            } else if k > 0.0 {
                paired.push(k);
            }
        }
        // Constant: J h n from the field plus the xi of every paired mode counted once per pair.
        let offset: f64 = j * h * n as f64 + paired.iter().map(|&k| xi(k)).sum::<f64>();
        // (energy, parity) options per degree of freedom.
        let mut partial: Vec<(f64, bool)> = alloc::vec![(offset, false)];
        for &k in &paired {
            let e = dispersion(k, j, r, h).abs();
            let opts = [(-e, false), (0.0, true), (0.0, true), (e, false)];
            partial = partial
                .iter()
                .flat_map(|&(acc, par)| opts.iter().map(move |&(de, p)| (acc + de, par ^ p)))
                .collect();
        }
        for &x in &unpaired {
            let opts = [(0.0, false), (x, true)];
            partial = partial
                .iter()
                .flat_map(|&(acc, par)| opts.iter().map(move |&(de, p)| (acc + de, par ^ p)))
                .collect();
        }
        levels.extend(partial.into_iter().filter(|&(_, p)| p == odd_sector).map(|(e, _)| e));
    }
    levels.sort_by(|a, b| a.total_cmp(b));
    levels
}
