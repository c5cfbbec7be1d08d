//! Compiling `exp(-iHt)` into a brick-wall circuit by Riemannian trust-region optimisation
//! over `U(4)^m`, one shared two-qubit gate per layer.
//!
//! The manifold carries the metric `Re tr(A^dag B)` inherited from `C^{4x4}`, tangent vectors
//! at `G` are `G Omega` with `Omega` skew-Hermitian, and the retraction is the unitary QR
//! factor with positive diagonal.

mod brickwall;
mod tcg;
mod trotter;

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use brickwall::{brickwall_expand, cost, euclidean_gradient, layer_pairs, CostReport};
pub use tcg::{truncated_cg, Subproblem, TcgConfig, TcgStop};
pub use trotter::{trotter_compile, FieldSplit};

use crate::linalg::{self, qf4, real_inner4, Gate4, C64};
use crate::model::{ModelParams, Propagator, UnitaryOperator};
use crate::{Error, Result};

const GATE_UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GateSequence {
    n: usize,
    gates: Vec<Gate4>,
}

impl GateSequence {
    pub fn new(n: usize, gates: Vec<Gate4>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig("brick-wall circuits need at least two qubits"));
        }
        if gates.is_empty() {
            return Err(Error::InvalidConfig("at least one layer is required"));
        }
        for g in &gates {
            let defect = linalg::unitarity_defect4(g);
            if defect > GATE_UNITARY_TOL {
                return Err(Error::NotUnitary(defect));
            }
        }
        Ok(Self { n, gates })
    }

    pub fn identity(n: usize, layers: usize) -> Result<Self> {
        Self::new(n, alloc::vec![Gate4::identity(); layers])
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> usize {
        self.gates.len()
    }

    pub fn gates(&self) -> &[Gate4] {
        &self.gates
    }

    #[cfg(test)]
    pub(crate) fn gates_mut(&mut self) -> &mut [Gate4] {
        &mut self.gates
    }

    /// Entrywise complex conjugate of every gate, which expands to `E(G)^*`.
    pub fn conjugate(&self) -> Self {
        Self { n: self.n, gates: self.gates.iter().map(|g| g.conjugate()).collect() }
    }

    /// Two-qubit operations in application order as `(gate, first site)`; the gate acts on
    /// sites `(s, s+1)` with `s` as its more significant bit.
    pub fn placements(&self) -> impl Iterator<Item = (&Gate4, usize)> + '_ {
        self.gates
            .iter()
            .enumerate()
            .flat_map(move |(index, g)| layer_pairs(self.n, index).map(move |s| (g, s)))
    }
}

/// Element of the tangent space at some `G`, one 4x4 block per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(pub Vec<Gate4>);

impl TangentVector {
    pub fn zeros_like(&self) -> Self {
        Self(alloc::vec![Gate4::zeros(); self.0.len()])
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| real_inner4(a, b)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|a| a * C64::new(s, 0.0)).collect())
    }

    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        let s = C64::new(s, 0.0);
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b * s).collect())
    }

    pub fn axpy(&mut self, s: f64, other: &Self) {
        let s = C64::new(s, 0.0);
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b * s;
        }
    }

    /// Largest deviation of `G_l^dag H_l` from skew-Hermitian.
    pub fn tangency_defect(&self, at: &GateSequence) -> f64 {
        self.0
            .iter()
            .zip(at.gates())
            .map(|(h, g)| {
                let a = g.adjoint() * h;
                linalg::max_abs(&(a + a.adjoint()))
            })
            .fold(0.0, f64::max)
    }
}

/// `P_G(Z)_l = Z_l - G_l herm(G_l^dag Z_l)`.
pub fn project(at: &GateSequence, z: &TangentVector) -> TangentVector {
    TangentVector(
        at.gates()
            .iter()
            .zip(&z.0)
            .map(|(g, zl)| {
                let a = g.adjoint() * zl;
                zl - g * ((a + a.adjoint()) * C64::new(0.5, 0.0))
            })
            .collect(),
    )
}

/// `R(G, H)_l = qf(G_l + H_l)`.
pub fn qr_retraction(at: &GateSequence, step: &TangentVector) -> Result<GateSequence> {
    let gates = at
        .gates()
        .iter()
        .zip(&step.0)
        .map(|(g, h)| qf4(&(g + h)).ok_or(Error::SingularRetraction))
        .collect::<Result<Vec<_>>>()?;
    Ok(GateSequence { n: at.n, gates })
}

pub fn riemannian_gradient(at: &GateSequence, target: &UnitaryOperator) -> Result<TangentVector> {
    Ok(project(at, &euclidean_gradient(at, target)?))
}

/// Hessian-vector product by differencing projected gradients along the retraction:
/// `(P_G grad f(R_G(s eta)) - grad f(G)) / s` with `s ||eta|| = 1e-5 (1 + ||G||)`.
pub fn hessian_vector(
    at: &GateSequence,
    target: &UnitaryOperator,
    grad: &TangentVector,
    eta: &TangentVector,
) -> Result<TangentVector> {
    let eta_norm = eta.norm();
    if eta_norm == 0.0 {
        return Ok(eta.zeros_like());
    }
    let g_norm = (4.0 * at.layers() as f64).sqrt();
    let s = 1e-5 * (1.0 + g_norm) / eta_norm;
    let moved = qr_retraction(at, &eta.scaled(s))?;
    let moved_grad = riemannian_gradient(&moved, target)?;
    Ok(project(at, &project(at, &moved_grad).add_scaled(grad, -1.0)).scaled(1.0 / s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionConfig {
    pub initial_radius: f64,
    pub max_radius: f64,
    pub accept_ratio: f64,
    pub expand_ratio: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub min_radius: f64,
    /// Stop as soon as the cost drops to this value (`0` disables the test).
    pub cost_tol: f64,
    /// Random initialisations tried by [`rtr_compile`], on top of any warm starts.
    pub restarts: usize,
    /// Scale of the Gaussian perturbation of the identity used for random starts.
    pub init_spread: f64,
    pub tcg: TcgConfig,
}

impl TrustRegionConfig {
    pub fn for_layers(m: usize) -> Self {
        let root = (m.max(1) as f64).sqrt();
        Self {
            initial_radius: 0.1 * root,
            max_radius: root,
            accept_ratio: 0.1,
            expand_ratio: 0.75,
            max_iters: 500,
            grad_tol: 1e-8,
            min_radius: 1e-14,
            cost_tol: 0.0,
            restarts: 1,
            init_spread: 0.01,
            tcg: TcgConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.accept_ratio && self.accept_ratio < self.expand_ratio && self.expand_ratio < 1.0) {
            return Err(Error::InvalidConfig("need 0 < accept_ratio < expand_ratio < 1"));
        }
        if !(0.0 < self.initial_radius && self.initial_radius <= self.max_radius) {
            return Err(Error::InvalidConfig("need 0 < initial_radius <= max_radius"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompilationResult {
    pub gates: GateSequence,
    /// Cost after the initial point and after every accepted step.
    pub cost_history: Vec<f64>,
    pub final_error: f64,
    pub phase_aligned_error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Seed stream of the winning start (`None` for a caller-supplied start).
    pub start: Option<u64>,
}

impl CompilationResult {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().expect("history holds the initial cost")
    }
}

/// `qf(I + spread * Z)` with `Z` complex standard Gaussian.
pub fn random_gate(rng: &mut impl Rng, spread: f64) -> Gate4 {
    loop {
        let z = Gate4::from_fn(|r, c| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * spread, im * spread) + if r == c { linalg::ONE } else { linalg::ZERO }
        });
        if let Some(q) = qf4(&z) {
            return q;
        }
    }
}

/// Haar-random gate: QR of a complex Ginibre matrix with positive-diagonal `R`.
pub fn haar_gate(rng: &mut impl Rng) -> Gate4 {
    loop {
        let z = Gate4::from_fn(|_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        if let Some(q) = qf4(&z) {
            return q;
        }
    }
}

pub fn random_sequence(n: usize, layers: usize, spread: f64, rng: &mut impl Rng) -> Result<GateSequence> {
    GateSequence::new(n, (0..layers).map(|_| random_gate(rng, spread)).collect())
}

/// One trust-region run from `start`.
pub fn rtr_optimize(
    target: &UnitaryOperator,
    start: GateSequence,
    cfg: &TrustRegionConfig,
) -> Result<CompilationResult> {
    cfg.validate()?;
    brickwall::check_dims(&start, target)?;
    let mut x = start;
    let mut f = brickwall::cost_value(&x, target);
    let mut grad = riemannian_gradient(&x, target)?;
    let mut history = alloc::vec![f];
    let mut delta = cfg.initial_radius;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if grad.norm() <= cfg.grad_tol || f <= cfg.cost_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut hess_err = None;
        let sub = truncated_cg(
            &grad,
            |v| match hessian_vector(&x, target, &grad, v) {
                Ok(hv) => hv,
                Err(e) => {
                    hess_err = Some(e);
                    v.zeros_like()
                }
            },
            delta,
            &cfg.tcg,
        );
        let candidate = match (hess_err, qr_retraction(&x, &sub.eta)) {
            (None, Ok(c)) => c,
            _ => {
                delta *= 0.25;
                if delta < cfg.min_radius {
                    break;
                }
                continue;
            }
        };
        let f_new = brickwall::cost_value(&candidate, target);
        let reg = 1e3 * f64::EPSILON * f.abs().max(1.0);
        let rho = (f - f_new + reg) / (sub.model_decrease + reg);
        if rho < cfg.accept_ratio || f_new > f {
            delta *= 0.25;
        } else {
            x = candidate;
            f = f_new;
            grad = riemannian_gradient(&x, target)?;
            history.push(f);
            let at_boundary = sub.eta.norm() >= 0.99 * delta;
            if rho > cfg.expand_ratio && at_boundary {
                delta = (2.0 * delta).min(cfg.max_radius);
            }
        }
        if delta < cfg.min_radius {
            break;
        }
    }
    if !converged && (grad.norm() <= cfg.grad_tol || f <= cfg.cost_tol) {
        converged = true;
    }
    let report = cost(&x, target)?;
    Ok(CompilationResult {
        gates: x,
        cost_history: history,
        final_error: report.normalized,
        phase_aligned_error: report.phase_aligned,
        iterations,
        converged,
        start: None,
    })
}

/// Multi-start compilation: caller-supplied warm starts first, then `cfg.restarts` random
/// near-identity starts drawn from seed streams `0..restarts` of `seed`. The lowest final
/// cost wins; once a start reaches `cfg.cost_tol` the remaining ones are skipped.
pub fn rtr_compile_with_starts(
    target: &UnitaryOperator,
    layers: usize,
    cfg: &TrustRegionConfig,
    seed: u64,
    warm_starts: &[GateSequence],
) -> Result<CompilationResult> {
    cfg.validate()?;
    if layers == 0 {
        return Err(Error::InvalidConfig("at least one layer is required"));
    }
    if warm_starts.is_empty() && cfg.restarts == 0 {
        return Err(Error::InvalidConfig("no starting point: zero restarts and no warm start"));
    }
    let n = target.qubits();
    let mut best: Option<CompilationResult> = None;
    let mut consider = |res: CompilationResult| {
        if best.as_ref().is_none_or(|b| res.final_cost() < b.final_cost()) {
            best = Some(res);
        }
        best.as_ref().is_some_and(|b| b.final_cost() <= cfg.cost_tol)
    };
    if warm_starts.iter().any(|w| w.layers() != layers) {
        return Err(Error::InvalidConfig("warm start has the wrong layer count"));
    }
    for warm in warm_starts {
        if consider(rtr_optimize(target, warm.clone(), cfg)?) {
            return Ok(best.expect("just set"));
        }
    }
    for stream in 0..cfg.restarts as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let start = random_sequence(n, layers, cfg.init_spread, &mut rng)?;
        let mut res = rtr_optimize(target, start, cfg)?;
        res.start = Some(stream);
        if consider(res) {
            break;
        }
    }
    Ok(best.expect("at least one start"))
}

pub fn rtr_compile(
    target: &UnitaryOperator,
    layers: usize,
    cfg: &TrustRegionConfig,
    seed: u64,
) -> Result<CompilationResult> {
    rtr_compile_with_starts(target, layers, cfg, seed, &[])
}

/// Compiles `exp(-iHt)` for every time of `t_grid` (sorted ascending). Each time is warm
/// started from the circuit found at the previous time (identity before the first) and from
/// the Trotter circuit of the same depth, in addition to `cfg.restarts` random starts.
pub fn rtr_schedule(
    params: &ModelParams,
    t_grid: &[f64],
    layers: usize,
    cfg: &TrustRegionConfig,
    seed: u64,
) -> Result<Vec<CompilationResult>> {
    let prop = Propagator::for_model(params)?;
    let mut previous = GateSequence::identity(params.n, layers)?;
    let mut out = Vec::with_capacity(t_grid.len());
    for (index, &t) in t_grid.iter().enumerate() {
        let target = prop.at(t)?;
        let starts = [previous, trotter_compile(params, t, layers)?];
        let slice_seed = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let res = rtr_compile_with_starts(&target, layers, cfg, slice_seed, &starts)?;
        previous = res.gates.clone();
        out.push(res);
    }
    Ok(out)
}
