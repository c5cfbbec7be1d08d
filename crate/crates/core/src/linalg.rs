//! Dense complex linear algebra shared by the model, the compiler and the simulator.
//!
//! Matrices are `nalgebra` column-major. The gate kernels address qubits through bit masks
//! over a basis index, so the same code applies a gate to a statevector, to the columns of
//! an operator (left multiplication) or to its rows (right multiplication).

use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix2, Matrix4};

use crate::{Error, Result};

pub type C64 = num_complex::Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type Gate2 = Matrix2<C64>;
pub type Gate4 = Matrix4<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Largest entry modulus.
pub fn max_abs<R: nalgebra::Dim, Cc: nalgebra::Dim, S>(m: &nalgebra::Matrix<C64, R, Cc, S>) -> f64
where
    S: nalgebra::RawStorage<C64, R, Cc>,
{
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |(M^dag M - I)_ij|` for a square matrix.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let prod = m.adjoint() * m;
    let mut worst: f64 = 0.0;
    for (r, c) in (0..prod.nrows()).flat_map(|r| (0..prod.ncols()).map(move |c| (r, c))) {
        let target = if r == c { ONE } else { ZERO };
        worst = worst.max((prod[(r, c)] - target).norm());
    }
    worst
}

pub fn unitarity_defect4(g: &Gate4) -> f64 {
    max_abs(&(g.adjoint() * g - Gate4::identity()))
}

pub fn unitarity_defect2(g: &Gate2) -> f64 {
    max_abs(&(g.adjoint() * g - Gate2::identity()))
}

/// `max |M_ij - conj(M_ji)|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Frobenius inner product `Re tr(A^dag B)`.
pub fn real_inner4(a: &Gate4, b: &Gate4) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Eigendecomposition `H = Q diag(w) Q^dag` of a Hermitian matrix, kept around so that
/// `exp(-iHt)` can be formed for many times without re-solving.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Result<Self> {
        let eig = h
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or(Error::EigenFailure)?;
        Ok(Self { values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors })
    }

    /// `Q diag(exp(-i w t)) Q^dag`.
    pub fn evolution(&self, t: f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (c, w) in self.values.iter().enumerate() {
            let phase = C64::new(0.0, -w * t).exp();
            for z in scaled.column_mut(c).iter_mut() {
                *z *= phase;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// `exp(-i H t)` for a 4x4 Hermitian generator.
pub fn expm_hermitian4(h: &Gate4, t: f64) -> Gate4 {
    let eig = h.symmetric_eigen();
    let mut phases = Gate4::zeros();
    for k in 0..4 {
        phases[(k, k)] = C64::new(0.0, -eig.eigenvalues[k] * t).exp();
    }
    eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// Unitary factor of `A = QR` with the diagonal of `R` made real and strictly positive.
/// Returns `None` when `A` is numerically singular.
pub fn qf4(a: &Gate4) -> Option<Gate4> {
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    for k in 0..4 {
        let d = r[(k, k)];
        let modulus = d.norm();
        if !(modulus > 1e-13 * scale) {
            return None;
        }
        let phase = d / modulus;
        for row in 0..4 {
            q[(row, k)] *= phase;
        }
    }
    Some(q)
}

pub fn pauli_matrix(which: crate::model::Pauli) -> Gate2 {
    use crate::model::Pauli;
    match which {
        Pauli::I => Gate2::new(ONE, ZERO, ZERO, ONE),
        Pauli::X => Gate2::new(ZERO, ONE, ONE, ZERO),
        Pauli::Y => Gate2::new(ZERO, -I, I, ZERO),
        Pauli::Z => Gate2::new(ONE, ZERO, ZERO, -ONE),
    }
}

pub fn kron2(a: &Gate2, b: &Gate2) -> Gate4 {
    let mut out = Gate4::zeros();
    for (ar, ac) in (0..2).flat_map(|r| (0..2).map(move |c| (r, c))) {
        for (br, bc) in (0..2).flat_map(|r| (0..2).map(move |c| (r, c))) {
            out[(2 * ar + br, 2 * ac + bc)] = a[(ar, ac)] * b[(br, bc)];
        }
    }
    out
}

/// Apply a 4x4 gate to the two bits selected by `hi` and `lo` (the gate's more and less
/// significant index bit) of the strided vector `v[offset + k * stride]`, `k < dim`.
#[inline]
pub fn apply_gate4_strided(
    v: &mut [C64],
    offset: usize,
    stride: usize,
    dim: usize,
    hi: usize,
    lo: usize,
    g: &Gate4,
) {
    let both = hi | lo;
    for base in 0..dim {
        if base & both != 0 {
            continue;
        }
        let idx = [base, base | lo, base | hi, base | both].map(|k| offset + k * stride);
        let a = idx.map(|k| v[k]);
        for (r, &k) in idx.iter().enumerate() {
            v[k] = g[(r, 0)] * a[0] + g[(r, 1)] * a[1] + g[(r, 2)] * a[2] + g[(r, 3)] * a[3];
        }
    }
}

#[inline]
pub fn apply_gate2_strided(
    v: &mut [C64],
    offset: usize,
    stride: usize,
    dim: usize,
    mask: usize,
    g: &Gate2,
) {
    for base in 0..dim {
        if base & mask != 0 {
            continue;
        }
        let (i0, i1) = (offset + base * stride, offset + (base | mask) * stride);
        let (a0, a1) = (v[i0], v[i1]);
        v[i0] = g[(0, 0)] * a0 + g[(0, 1)] * a1;
        v[i1] = g[(1, 0)] * a0 + g[(1, 1)] * a1;
    }
}

/// Apply a dense `2^k x 2^k` matrix to the bits `masks` (first entry is the most
/// significant bit of the matrix index) of a contiguous vector of length `dim`.
pub fn apply_dense(v: &mut [C64], dim: usize, masks: &[usize], m: &CMatrix) {
    let k = masks.len();
    let sub = 1usize << k;
    debug_assert_eq!(m.nrows(), sub);
    let all: usize = masks.iter().fold(0, |acc, &x| acc | x);
    let offsets: Vec<usize> = (0..sub)
        .map(|s| {
            masks
                .iter()
                .enumerate()
                .filter(|(b, _)| s & (1 << (k - 1 - b)) != 0)
                .fold(0, |acc, (_, &mask)| acc | mask)
        })
        .collect();
    let mut gathered = alloc::vec![ZERO; sub];
    for base in 0..dim {
        if base & all != 0 {
            continue;
        }
        for (s, off) in offsets.iter().enumerate() {
            gathered[s] = v[base | off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (c, a) in gathered.iter().enumerate() {
                acc += m[(r, c)] * a;
            }
            v[base | off] = acc;
        }
    }
}
