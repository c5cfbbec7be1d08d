//! Brick-wall circuits `E(G_1, ..., G_m)` and the Frobenius cost `||E(G) - U||_F^2` with its
//! Euclidean gradient.
//!
//! Layer `l` (1-indexed) applies `G_l` to every adjacent pair starting at qubit 1 when `l` is
//! odd and at qubit 2 when `l` is even. Qubit 1 is the most significant bit.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{GateSequence, TangentVector};
use crate::linalg::{self, apply_gate4_strided, CMatrix, Gate4, C64, ZERO};
use crate::model::UnitaryOperator;
use crate::{Error, Result};

/// First sites (1-indexed) of the pairs touched by layer `index` (0-indexed).
pub fn layer_pairs(n: usize, index: usize) -> impl Iterator<Item = usize> {
    let start = if index % 2 == 0 { 1 } else { 2 };
    (start..n).step_by(2)
}

#[inline]
fn site_mask(n: usize, site: usize) -> usize {
    1 << (n - site)
}

/// `X <- L X` for the layer built from `g`, optionally skipping one pair.
fn left_apply(x: &mut CMatrix, n: usize, index: usize, g: &Gate4, skip: Option<usize>) {
    let dim = x.nrows();
    let data = x.as_mut_slice();
    for s in layer_pairs(n, index).filter(|&s| Some(s) != skip) {
        let (hi, lo) = (site_mask(n, s), site_mask(n, s + 1));
        for col in 0..dim {
            apply_gate4_strided(data, col * dim, 1, dim, hi, lo, g);
        }
    }
}

/// `X <- X M` where `M` is the layer built from `g_t`, given as its transpose `g_t`.
fn right_apply_transposed(x: &mut CMatrix, n: usize, index: usize, g_t: &Gate4) {
    let dim = x.nrows();
    let data = x.as_mut_slice();
    for s in layer_pairs(n, index) {
        let (hi, lo) = (site_mask(n, s), site_mask(n, s + 1));
        for row in 0..dim {
            apply_gate4_strided(data, row, dim, dim, hi, lo, g_t);
        }
    }
}

pub fn brickwall_expand(gates: &GateSequence) -> UnitaryOperator {
    let n = gates.qubits();
    let mut e = linalg::identity(1 << n);
    for (index, g) in gates.gates().iter().enumerate() {
        left_apply(&mut e, n, index, g, None);
    }
    // Products of exactly unitary layers stay unitary to rounding.
    UnitaryOperator::new(e).expect("brick-wall product of unitary gates is unitary")
}

/// Squared Frobenius distance together with its normalisations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    /// `||E(G) - U||_F^2`.
    pub value: f64,
    /// `||E(G) - U||_F / sqrt(2^n)`, in `[0, 2]`.
    pub normalized: f64,
    /// `min_phi ||E(G) - e^{i phi} U||_F / sqrt(2^n)`.
    pub phase_aligned: f64,
}

pub(crate) fn check_dims(gates: &GateSequence, target: &UnitaryOperator) -> Result<()> {
    let expected = 1usize << gates.qubits();
    if target.dim() != expected {
        return Err(Error::DimensionMismatch { expected, actual: target.dim() });
    }
    Ok(())
}

pub fn cost(gates: &GateSequence, target: &UnitaryOperator) -> Result<CostReport> {
    check_dims(gates, target)?;
    Ok(cost_of(brickwall_expand(gates).matrix(), target.matrix()))
}

pub(crate) fn cost_of(e: &CMatrix, u: &CMatrix) -> CostReport {
    let dim = e.nrows() as f64;
    let mut value = 0.0;
    let mut overlap = ZERO;
    for (a, b) in e.iter().zip(u.iter()) {
        value += (a - b).norm_sqr();
        overlap += b.conj() * a;
    }
    let aligned = (2.0 * dim - 2.0 * overlap.norm()).max(0.0);
    CostReport {
        value,
        normalized: (value / dim).sqrt(),
        phase_aligned: (aligned / dim).sqrt(),
    }
}

pub(crate) fn cost_value(gates: &GateSequence, target: &UnitaryOperator) -> f64 {
    cost_of(brickwall_expand(gates).matrix(), target.matrix()).value
}

/// Partial trace of `y` over every qubit except the pair `(s, s+1)`.
fn pair_environment(y: &CMatrix, n: usize, s: usize) -> Gate4 {
    let dim = y.nrows();
    let (hi, lo) = (site_mask(n, s), site_mask(n, s + 1));
    let off = [0, lo, hi, hi | lo];
    let mut m = Gate4::zeros();
    for base in (0..dim).filter(|b| b & (hi | lo) == 0) {
        for (a, oa) in off.iter().enumerate() {
            for (b, ob) in off.iter().enumerate() {
                m[(a, b)] += y[(base | oa, base | ob)];
            }
        }
    }
    m
}

/// Euclidean gradient, with respect to every gate, of `2 * 2^n - 2 Re tr(U^dag E(G))`: the
/// extension of `||E(G) - U||_F^2` off the unitary manifold that is linear in each gate. Both
/// agree on the manifold, so their tangent projections (the Riemannian gradient) coincide.
///
/// With `W_l = L_{l-1} ... L_1 U^dag L_m ... L_{l+1}` the overlap is `tr(U^dag E) = tr(L_l W_l)`,
/// and `W_{l+1} = L_l W_l L_{l+1}^dag`. A gate occurring at several pairs of its layer receives
/// one environment per pair.
pub fn euclidean_gradient(gates: &GateSequence, target: &UnitaryOperator) -> Result<TangentVector> {
    check_dims(gates, target)?;
    let n = gates.qubits();
    let gs = gates.gates();
    let m = gs.len();
    let transposed: Vec<Gate4> = gs.iter().map(|g| g.transpose()).collect();
    let conjugated: Vec<Gate4> = gs.iter().map(|g| g.conjugate()).collect();

    let mut w = target.matrix().adjoint();
    for index in (1..m).rev() {
        right_apply_transposed(&mut w, n, index, &transposed[index]);
    }
    let mut grads = Vec::with_capacity(m);
    for index in 0..m {
        let pairs: Vec<usize> = layer_pairs(n, index).collect();
        let mut grad = Gate4::zeros();
        for &s in &pairs {
            let env = if pairs.len() == 1 {
                pair_environment(&w, n, s)
            } else {
                let mut y = w.clone();
                left_apply(&mut y, n, index, &gs[index], Some(s));
                pair_environment(&y, n, s)
            };
            grad -= env.adjoint() * C64::new(2.0, 0.0);
        }
        grads.push(grad);
        if index + 1 < m {
            left_apply(&mut w, n, index, &gs[index], None);
            right_apply_transposed(&mut w, n, index + 1, &conjugated[index + 1]);
        }
    }
    Ok(TangentVector(grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian4, kron, max_abs};
    use crate::rtr::random_gate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn as_dmatrix(g: &Gate4) -> CMatrix {
        CMatrix::from_fn(4, 4, |r, c| g[(r, c)])
    }

    #[test]
    fn identity_gates_expand_to_identity() {
        let seq = GateSequence::identity(5, 3).unwrap();
        assert!(max_abs(&(brickwall_expand(&seq).matrix() - linalg::identity(32))) == 0.0);
    }

    #[test]
    fn single_layer_on_two_qubits_is_the_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_gate(&mut rng, 1.0);
        let seq = GateSequence::new(2, alloc::vec![g]).unwrap();
        assert!(max_abs(&(brickwall_expand(&seq).matrix() - as_dmatrix(&g))) < 1e-14);
    }

    #[test]
    fn two_layers_on_four_qubits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (g1, g2) = (random_gate(&mut rng, 1.0), random_gate(&mut rng, 1.0));
        let seq = GateSequence::new(4, alloc::vec![g1, g2]).unwrap();
        let i2 = linalg::identity(2);
        let first = kron(&as_dmatrix(&g1), &as_dmatrix(&g1));
        let second = kron(&kron(&i2, &as_dmatrix(&g2)), &i2);
        let expected = second * first;
        assert!(max_abs(&(brickwall_expand(&seq).matrix() - expected)) < 1e-13);
    }

    #[test]
    fn cost_examples() {
        let seq = GateSequence::identity(3, 2).unwrap();
        let id = UnitaryOperator::identity(8);
        assert_eq!(cost(&seq, &id).unwrap().value, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gates = (0..3).map(|_| random_gate(&mut rng, 1.0)).collect();
        let seq = GateSequence::new(3, gates).unwrap();
        let target = brickwall_expand(&seq);
        assert!(cost(&seq, &target).unwrap().value < 1e-24);
        assert!(matches!(
            cost(&seq, &UnitaryOperator::identity(4)),
            Err(Error::DimensionMismatch { expected: 8, actual: 4 })
        ));
    }

    #[test]
    fn cost_bounded_by_four_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let seq = GateSequence::new(4, (0..3).map(|_| random_gate(&mut rng, 1.0)).collect()).unwrap();
            let other = GateSequence::new(4, (0..2).map(|_| random_gate(&mut rng, 1.0)).collect()).unwrap();
            let c = cost(&seq, &brickwall_expand(&other)).unwrap();
            assert!(c.value <= 4.0 * 16.0 + 1e-12);
            assert!(c.normalized <= 2.0 + 1e-12 && c.phase_aligned <= c.normalized + 1e-12);
        }
    }

    #[test]
    fn phase_aligned_error_ignores_global_phase() {
        let seq = GateSequence::identity(2, 1).unwrap();
        let phase = C64::new(0.0, 0.7).exp();
        let target = UnitaryOperator::new(linalg::identity(4) * phase).unwrap();
        let c = cost(&seq, &target).unwrap();
        assert!(c.normalized > 0.5);
        assert!(c.phase_aligned < 1e-7);
    }

    #[test]
    fn single_gate_gradient_is_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_gate(&mut rng, 1.0);
        let u = expm_hermitian4(&Gate4::from_fn(|r, c| C64::new((r * c) as f64 * 0.1, 0.0)), 1.0);
        let seq = GateSequence::new(2, alloc::vec![g]).unwrap();
        let grad = euclidean_gradient(&seq, &UnitaryOperator::new(as_dmatrix(&u)).unwrap()).unwrap();
        // Derivative of -2 Re tr(U^dag G).
        assert!(max_abs(&(grad.0[0] + u * C64::new(2.0, 0.0))) < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences_in_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [3, 4, 5] {
            let seq = GateSequence::new(n, (0..3).map(|_| random_gate(&mut rng, 1.0)).collect()).unwrap();
            let target = brickwall_expand(
                &GateSequence::new(n, (0..2).map(|_| random_gate(&mut rng, 1.0)).collect()).unwrap(),
            );
            let grad = euclidean_gradient(&seq, &target).unwrap();
            // Overlap part only: f = 2 dim - 2 Re tr(U^dag E) is linear in each gate entry.
            let overlap = |s: &GateSequence| {
                let e = expand_unchecked(s);
                let mut acc = ZERO;
                for (a, b) in e.iter().zip(target.matrix().iter()) {
                    acc += b.conj() * a;
                }
                -2.0 * acc.re
            };
            for layer in 0..3 {
                for (r, c) in [(0, 0), (1, 2), (3, 1)] {
                    for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                        let step = 1e-6;
                        let mut plus = seq.clone();
                        plus.gates_mut()[layer][(r, c)] += dir * step;
                        let mut minus = seq.clone();
                        minus.gates_mut()[layer][(r, c)] -= dir * step;
                        let fd = (overlap(&plus) - overlap(&minus)) / (2.0 * step);
                        let an = grad.0[layer][(r, c)].re * dir.re + grad.0[layer][(r, c)].im * dir.im;
                        assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "n={n} layer={layer}: {fd} vs {an}");
                    }
                }
            }
        }
    }

    fn expand_unchecked(s: &GateSequence) -> CMatrix {
        let n = s.qubits();
        let mut e = linalg::identity(1 << n);
        for (index, g) in s.gates().iter().enumerate() {
            left_apply(&mut e, n, index, g, None);
        }
        e
    }
}
