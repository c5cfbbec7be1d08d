//! First-order Lie-Trotter baseline in the shared-gate brick-wall format.
//!
//! Odd layers carry the bonds `(1,2), (3,4), ...` and even layers `(2,3), (4,5), ...`. With
//! `L` layers there are `ceil(L/2)` odd and `floor(L/2)` even layers; each odd layer advances
//! its bonds by `t / ceil(L/2)` and each even layer by `t / floor(L/2)`.
//!
//! Since every pair in a layer shares one gate, the field is split through fixed weights
//! `h (a Z_s + b Z_{s+1})` on odd gates and `h (c Z_s + d Z_{s+1})` on even gates. The
//! weights are the minimum-norm least-squares solution of "every site sees field `h` in
//! total", which is exact for even `n` and leaves a boundary residual for odd `n`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{layer_pairs, GateSequence};
use crate::linalg::{expm_hermitian4, kron2, pauli_matrix, Gate4, C64};
use crate::model::{ModelParams, Pauli};
use crate::{Error, Result};

/// Field weights `(first site, second site)` of odd and even gates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSplit {
    pub odd: (f64, f64),
    pub even: (f64, f64),
    /// Largest deviation of a site's total weight from 1.
    pub residual: f64,
}

impl FieldSplit {
    pub fn for_chain(n: usize, with_even: bool) -> Self {
        let cols = if with_even { 4 } else { 2 };
        let mut a = DMatrix::<f64>::zeros(n, cols);
        for s in layer_pairs(n, 0) {
            a[(s - 1, 0)] += 1.0;
            a[(s, 1)] += 1.0;
        }
        if with_even {
            for s in layer_pairs(n, 1) {
                a[(s - 1, 2)] += 1.0;
                a[(s, 3)] += 1.0;
            }
        }
        let b = DVector::<f64>::from_element(n, 1.0);
        let w = a
            .clone()
            .svd(true, true)
            .solve(&b, 1e-12)
            .expect("both factors were requested");
        let residual = (&a * &w - b).amax();
        let even = if with_even { (w[2], w[3]) } else { (0.0, 0.0) };
        Self { odd: (w[0], w[1]), even, residual }
    }
}

fn bond_generator(p: &ModelParams, weights: (f64, f64)) -> Gate4 {
    let x = pauli_matrix(Pauli::X);
    let y = pauli_matrix(Pauli::Y);
    let z = pauli_matrix(Pauli::Z);
    let id = pauli_matrix(Pauli::I);
    let re = |v: f64| C64::new(v, 0.0);
    (kron2(&x, &x) * re((1.0 + p.r) / 2.0)
        + kron2(&y, &y) * re((1.0 - p.r) / 2.0)
        + kron2(&z, &id) * re(p.h * weights.0)
        + kron2(&id, &z) * re(p.h * weights.1))
        * re(p.j)
}

pub fn trotter_compile(params: &ModelParams, t: f64, layers: usize) -> Result<GateSequence> {
    params.validate()?;
    if layers == 0 {
        return Err(Error::InvalidConfig("at least one layer is required"));
    }
    let n = params.n;
    let odd_layers = layers.div_ceil(2);
    let even_layers = layers / 2;
    let split = FieldSplit::for_chain(n, even_layers > 0);
    let odd = expm_hermitian4(&bond_generator(params, split.odd), t / odd_layers as f64);
    let even = if even_layers > 0 {
        expm_hermitian4(&bond_generator(params, split.even), t / even_layers as f64)
    } else {
        Gate4::identity()
    };
    let gates: Vec<Gate4> = (0..layers).map(|l| if l % 2 == 0 { odd } else { even }).collect();
    GateSequence::new(n, gates)
}
