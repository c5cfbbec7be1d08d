//! The anisotropic XY chain in a transverse field and its exact time evolution.
//!
//! `H = J sum_j [ (1+r)/2 X_j X_{j+1} + (1-r)/2 Y_j Y_{j+1} ] + J h sum_j Z_j`
//!
//! Site 1 is the most significant bit of the basis index.

use alloc::vec::Vec;

use crate::linalg::{self, CMatrix, HermitianEigen, C64};
use crate::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub j: f64,
    pub r: f64,
    pub h: f64,
    pub n: usize,
    pub boundary: Boundary,
}

impl ModelParams {
    pub fn new(j: f64, r: f64, h: f64, n: usize, boundary: Boundary) -> Result<Self> {
        let params = Self { j, r, h, n, boundary };
        params.validate()?;
        Ok(params)
    }

    /// Open chain, the layout the simulated circuits use.
    pub fn open(j: f64, r: f64, h: f64, n: usize) -> Result<Self> {
        Self::new(j, r, h, n, Boundary::Open)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("site count must be at least 1"));
        }
        if !(self.j.is_finite() && self.r.is_finite() && self.h.is_finite()) {
            return Err(Error::InvalidParams("J, r and h must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Nearest-neighbour bonds as 1-indexed site pairs.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut bonds: Vec<(usize, usize)> = (1..self.n).map(|s| (s, s + 1)).collect();
        // On a two-site ring the wrap bond repeats (1, 2); the sum is taken literally.
        if self.boundary == Boundary::Periodic && self.n > 1 {
            bonds.push((self.n, 1));
        }
        bonds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), actual: m.ncols() });
        }
        let defect = linalg::hermiticity_defect(&m);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn eigen(&self) -> Result<HermitianEigen> {
        HermitianEigen::new(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator(CMatrix);

impl UnitaryOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), actual: m.ncols() });
        }
        let defect = linalg::unitarity_defect(&m);
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(linalg::identity(dim))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Number of qubits, `log2(dim)`.
    pub fn qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }
}

/// The chosen Pauli on `site` (1-indexed) and identity elsewhere.
pub fn pauli_at(site: usize, which: Pauli, n: usize) -> Result<HermitianOperator> {
    if site == 0 || site > n {
        return Err(Error::SiteOutOfRange { site, n });
    }
    let p = linalg::pauli_matrix(which);
    let p = CMatrix::from_fn(2, 2, |r, c| p[(r, c)]);
    let left = linalg::identity(1 << (site - 1));
    let right = linalg::identity(1 << (n - site));
    Ok(HermitianOperator(linalg::kron(&linalg::kron(&left, &p), &right)))
}

/// Dense Hamiltonian assembled directly in the computational basis.
///
/// On a bond with bits `(a, b)` the exchange part maps `|ab>` to `|!a !b>` with amplitude
/// `J r` when `a == b` and `J` otherwise (`XX` flips both bits, `YY` additionally carries
/// `-s_a s_b` with `s = +1, -1` for bit `0, 1`).
pub fn build_xy_hamiltonian(params: &ModelParams) -> Result<HermitianOperator> {
    params.validate()?;
    let n = params.n;
    let dim = params.dim();
    let mask = |site: usize| 1usize << (n - site);
    let bonds = params.bonds();
    let mut h = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let field: f64 = (1..=n)
            .map(|s| if col & mask(s) == 0 { 1.0 } else { -1.0 })
            .sum();
        h[(col, col)] += C64::new(params.j * params.h * field, 0.0);
        for &(a, b) in &bonds {
            let (ma, mb) = (mask(a), mask(b));
            let same = (col & ma == 0) == (col & mb == 0);
            let amp = if same { params.j * params.r } else { params.j };
            h[(col ^ ma ^ mb, col)] += C64::new(amp, 0.0);
        }
    }
    HermitianOperator::new(h)
}

/// `exp(-i H t)` through the Hermitian eigendecomposition of `H`.
pub fn exact_evolution(h: &HermitianOperator, t: f64) -> Result<UnitaryOperator> {
    let eig = h.eigen()?;
    UnitaryOperator::new(eig.evolution(t))
}

/// Reusable propagator for one Hamiltonian at many times.
#[derive(Debug, Clone)]
pub struct Propagator {
    eig: HermitianEigen,
}

impl Propagator {
    pub fn new(h: &HermitianOperator) -> Result<Self> {
        Ok(Self { eig: h.eigen()? })
    }

    pub fn for_model(params: &ModelParams) -> Result<Self> {
        Self::new(&build_xy_hamiltonian(params)?)
    }

    pub fn at(&self, t: f64) -> Result<UnitaryOperator> {
        UnitaryOperator::new(self.eig.evolution(t))
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use core::f64::consts::PI;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn single_site_z() {
        let z = pauli_at(1, Pauli::Z, 1).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        assert_eq!(z.matrix(), &expected);
    }

    #[test]
    fn identity_on_three_sites() {
        let id = pauli_at(1, Pauli::I, 3).unwrap();
        assert_eq!(id.matrix(), &linalg::identity(8));
    }

    #[test]
    fn x_on_second_of_two_sites() {
        // I (x) X swaps |a0> <-> |a1>: 0<->1 and 2<->3.
        let x = pauli_at(2, Pauli::X, 2).unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        for (r, col) in [(1, 0), (0, 1), (3, 2), (2, 3)] {
            expected[(r, col)] = c(1.0);
        }
        assert_eq!(x.matrix(), &expected);
    }

    #[test]
    fn site_out_of_range() {
        assert_eq!(pauli_at(0, Pauli::X, 2), Err(Error::SiteOutOfRange { site: 0, n: 2 }));
        assert_eq!(pauli_at(3, Pauli::X, 2), Err(Error::SiteOutOfRange { site: 3, n: 2 }));
    }

    #[test]
    fn invalid_params() {
        assert!(ModelParams::open(1.0, 0.0, 0.0, 0).is_err());
        assert!(ModelParams::open(f64::NAN, 0.0, 0.0, 2).is_err());
    }

    #[test]
    fn pure_field_on_one_site() {
        let p = ModelParams::open(1.0, 0.0, 1.0, 1).unwrap();
        let h = build_xy_hamiltonian(&p).unwrap();
        assert_eq!(h.matrix(), pauli_at(1, Pauli::Z, 1).unwrap().matrix());
    }

    #[test]
    fn ising_limit_is_xx() {
        let p = ModelParams::open(1.0, 1.0, 0.0, 2).unwrap();
        let h = build_xy_hamiltonian(&p).unwrap();
        let xx = pauli_at(1, Pauli::X, 2).unwrap().into_matrix() * pauli_at(2, Pauli::X, 2).unwrap().into_matrix();
        assert!(max_abs(&(h.matrix() - xx)) == 0.0);
    }

    #[test]
    fn isotropic_two_sites_hops_between_01_and_10() {
        let p = ModelParams::open(1.0, 0.0, 0.0, 2).unwrap();
        let h = build_xy_hamiltonian(&p).unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        expected[(1, 2)] = c(1.0);
        expected[(2, 1)] = c(1.0);
        assert_eq!(h.matrix(), &expected);
    }

    fn from_paulis(p: &ModelParams) -> CMatrix {
        let n = p.n;
        let op = |s, w| pauli_at(s, w, n).unwrap().into_matrix();
        let mut h = CMatrix::zeros(p.dim(), p.dim());
        for (a, b) in p.bonds() {
            h += (op(a, Pauli::X) * op(b, Pauli::X)) * c(p.j * (1.0 + p.r) / 2.0);
            h += (op(a, Pauli::Y) * op(b, Pauli::Y)) * c(p.j * (1.0 - p.r) / 2.0);
        }
        for s in 1..=n {
            h += op(s, Pauli::Z) * c(p.j * p.h);
        }
        h
    }

    #[test]
    fn direct_construction_matches_pauli_products() {
        for (n, boundary) in [(3, Boundary::Open), (4, Boundary::Periodic), (5, Boundary::Open), (2, Boundary::Periodic)] {
            let p = ModelParams::new(0.7, 2.1, -0.8, n, boundary).unwrap();
            let h = build_xy_hamiltonian(&p).unwrap();
            assert!(max_abs(&(h.matrix() - from_paulis(&p))) < 1e-14, "n={n} {boundary:?}");
        }
    }

    #[test]
    fn evolution_at_zero_is_identity() {
        let p = ModelParams::open(1.0, 0.3, 0.4, 3).unwrap();
        let u = exact_evolution(&build_xy_hamiltonian(&p).unwrap(), 0.0).unwrap();
        assert!(max_abs(&(u.matrix() - linalg::identity(8))) < 1e-12);
    }

    #[test]
    fn evolution_of_z_at_quarter_period() {
        let z = pauli_at(1, Pauli::Z, 1).unwrap();
        let u = exact_evolution(&z, PI / 2.0).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, -1.0), c(0.0), c(0.0), C64::new(0.0, 1.0)]);
        assert!(max_abs(&(u.matrix() - expected)) < 1e-12);
    }

    #[test]
    fn five_site_evolution_is_unitary() {
        let p = ModelParams::open(1.0, 2.1, 0.8, 5).unwrap();
        let u = exact_evolution(&build_xy_hamiltonian(&p).unwrap(), 1.3).unwrap();
        assert!(linalg::unitarity_defect(u.matrix()) <= 1e-10);
    }

    #[test]
    fn group_law_and_time_reversal() {
        let p = ModelParams::new(0.9, 0.5, 0.3, 4, Boundary::Periodic).unwrap();
        let prop = Propagator::for_model(&p).unwrap();
        let (t1, t2) = (0.37, 1.1);
        let composed = prop.at(t1).unwrap().matrix() * prop.at(t2).unwrap().matrix();
        assert!(max_abs(&(composed - prop.at(t1 + t2).unwrap().matrix())) < 1e-9);
        let back = prop.at(-t2).unwrap();
        assert!(max_abs(&(back.matrix() - prop.at(t2).unwrap().matrix().adjoint())) < 1e-10);
    }
}
