//! The teleportation-based OTOC protocol and its brute-force Pauli-average oracle.
//!
//! After `U` on the `A` copy and `U^*` on the `B` copy of the Bell-paired input, the pair
//! `(A_j, B_j)` is measured in the Bell basis and, conditioned on the `(|00> + |11>)/sqrt 2`
//! outcome, `(A_0, B_0)` is read out. The conditional probability `F_EPR` of the same outcome
//! there satisfies `F_EPR = 1 / (4 <OTOC>)` for the Pauli-averaged OTOC between site 1 and
//! site `j`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{CMatrix, ZERO};
use crate::model::{build_xy_hamiltonian, pauli_at, ModelParams, Pauli, Propagator, UnitaryOperator};
use crate::rtr::GateSequence;
use crate::sim::{
    apply_readout_noise, bell_rotation_circuit, prepare_yky_input, preparation_circuit, sequence_pair_circuit,
    unitary_pair_circuit, Circuit, Fault, NoiseSpec, RegisterMap, ShotEngine, StateVector, MIN_CONDITIONING,
};
use crate::{Error, Result};

/// Two-sided 95% normal quantile used for confidence intervals.
pub const Z95: f64 = 1.96;
const IMAG_TOL: f64 = 1e-10;

/// `(1/16) sum_{V_1, W_j} Tr[W_j(t) V_1 W_j(t) V_1] / 2^n` with `W_j(t) = U^dag W_j U`.
pub fn averaged_otoc_oracle(u: &UnitaryOperator, j: usize) -> Result<f64> {
    let n = u.qubits();
    if j < 2 || j > n {
        return Err(Error::InvalidProbe { j, n });
    }
    let ud = u.matrix().adjoint();
    let vs: Vec<CMatrix> = Pauli::ALL.iter().map(|&p| pauli_at(1, p, n).map(|o| o.into_matrix())).collect::<Result<_>>()?;
    let mut total = ZERO;
    for p in Pauli::ALL {
        let w = pauli_at(j, p, n)?.into_matrix();
        let wt = &ud * w * u.matrix();
        for v in &vs {
            let a = &wt * v;
            // Tr[(W V)(W V)] without forming the square.
            total += a.iter().zip(a.transpose().iter()).map(|(x, y)| x * y).sum::<crate::C64>();
        }
    }
    let value = total / (16.0 * u.dim() as f64);
    if value.im.abs() > IMAG_TOL {
        return Err(Error::InvalidParams("Pauli-averaged OTOC has a non-negligible imaginary part"));
    }
    Ok(value.re)
}

/// `C = 2 - 1 / (2 F_EPR)`.
pub fn squared_commutator(f_epr: f64) -> Result<f64> {
    if !(f_epr > 0.0) {
        return Err(Error::NonPositiveFidelity(f_epr));
    }
    Ok(2.0 - 1.0 / (2.0 * f_epr))
}

/// Half-width of the Wilson score interval for `successes` out of `trials`.
pub fn wilson_halfwidth(successes: u64, trials: u64, z: f64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// How `F_EPR` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// Probabilities straight from amplitudes, conditioning by projection.
    Exact,
    /// Noiseless Bell-basis shots, conditioning by post-selection.
    Sampled,
    /// Shots with depolarizing gate noise and readout flips.
    Noisy,
    /// Exact outcome probabilities averaged over noise trajectories; `shots` counts
    /// trajectories and `F_EPR` is the ratio of the averaged joint and conditioning
    /// probabilities.
    Averaged,
}

impl EstimatorMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Sampled => "sampled",
            Self::Noisy => "noisy",
            Self::Averaged => "averaged",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Exact, Self::Sampled, Self::Noisy, Self::Averaged].into_iter().find(|m| m.as_str() == s)
    }

    fn noise(&self, noise: &NoiseSpec) -> NoiseSpec {
        match self {
            Self::Exact | Self::Sampled => NoiseSpec::NONE,
            Self::Noisy | Self::Averaged => *noise,
        }
    }
}

/// Time evolution used inside the protocol at one time `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Evolution {
    /// `exp(-iHt)` of the protocol's model, applied as one dense block per copy.
    Exact,
    /// A given unitary, applied as one dense block per copy.
    Unitary(UnitaryOperator),
    /// A compiled brick-wall circuit, applied gate by gate; these gates carry noise.
    Compiled(GateSequence),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub params: ModelParams,
    pub evolution: Evolution,
    pub j: usize,
    pub t: f64,
    pub mode: EstimatorMode,
    pub noise: NoiseSpec,
    pub shots: u64,
    pub seed: u64,
}

impl ProtocolSpec {
    pub fn exact(params: ModelParams, j: usize, t: f64) -> Self {
        Self {
            params,
            evolution: Evolution::Exact,
            j,
            t,
            mode: EstimatorMode::Exact,
            noise: NoiseSpec::NONE,
            shots: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtocRecord {
    pub j: usize,
    pub t: f64,
    pub f_epr: f64,
    /// `1 / (4 F_EPR)`.
    pub otoc: f64,
    /// `2 - 1 / (2 F_EPR)`.
    pub c: f64,
    pub mode: EstimatorMode,
    /// Shots, or trajectories in averaged mode; zero in exact mode.
    pub shots: u64,
    /// 95% half-width on `F_EPR` (Wilson for shots, delta method for trajectories).
    pub ci_halfwidth: Option<f64>,
    /// Standard error on `F_EPR`.
    pub std_error: Option<f64>,
}

impl OtocRecord {
    fn new(j: usize, t: f64, f_epr: f64, mode: EstimatorMode, shots: u64, std_error: Option<f64>, ci: Option<f64>) -> Result<Self> {
        let c = squared_commutator(f_epr)?;
        Ok(Self { j, t, f_epr, otoc: 1.0 / (4.0 * f_epr), c, mode, shots, ci_halfwidth: ci, std_error })
    }

    /// Standard error of `C`, propagated from `F_EPR`.
    pub fn c_std_error(&self) -> Option<f64> {
        self.std_error.map(|s| s / (2.0 * self.f_epr * self.f_epr))
    }

    /// Standard error of `1 / (4 F_EPR)`.
    pub fn otoc_std_error(&self) -> Option<f64> {
        self.std_error.map(|s| s / (4.0 * self.f_epr * self.f_epr))
    }
}

/// Everything needed to evaluate all probe sites at one time.
pub struct Slice<'a> {
    pub params: &'a ModelParams,
    pub t: f64,
    pub evolution: &'a Evolution,
    pub js: &'a [usize],
    pub mode: EstimatorMode,
    pub noise: &'a NoiseSpec,
    pub shots: u64,
}

fn evolution_circuit(map: &RegisterMap, params: &ModelParams, t: f64, evolution: &Evolution) -> Result<Circuit> {
    match evolution {
        Evolution::Exact => {
            let u = Propagator::new(&build_xy_hamiltonian(params)?)?.at(t)?;
            unitary_pair_circuit(map, &u)
        }
        Evolution::Unitary(u) => unitary_pair_circuit(map, u),
        Evolution::Compiled(seq) => sequence_pair_circuit(map, seq),
    }
}

fn check_probes(js: &[usize], n: usize) -> Result<()> {
    match js.iter().find(|&&j| j < 2 || j > n) {
        Some(&j) => Err(Error::InvalidProbe { j, n }),
        None => Ok(()),
    }
}

/// Probability that every listed pair reads `00`, from a distribution over `bits` outcome
/// bits where pair `p` occupies bits `2p, 2p + 1` counted from the most significant end.
fn pairs_zero(dist: &[f64], bits: usize, pairs: &[usize]) -> f64 {
    let mask = pairs.iter().fold(0usize, |acc, &p| acc | (0b11 << (bits - 2 - 2 * p)));
    dist.iter().enumerate().filter(|(o, _)| o & mask == 0).map(|(_, &w)| w).sum()
}

fn counts_zero(counts: &[u64], bits: usize, pairs: &[usize]) -> u64 {
    let mask = pairs.iter().fold(0usize, |acc, &p| acc | (0b11 << (bits - 2 - 2 * p)));
    counts.iter().enumerate().filter(|(o, _)| o & mask == 0).map(|(_, &c)| c).sum()
}

/// Evaluates every probe site in `slice.js` at one time, sharing the state preparation,
/// evolution, and (in shot modes) one set of shots across all probes. Each entry fails or
/// succeeds on its own.
pub fn evaluate_slice(slice: &Slice<'_>, rng: &mut ChaCha8Rng) -> Result<Vec<Result<OtocRecord>>> {
    let n = slice.params.n;
    check_probes(slice.js, n)?;
    let map = RegisterMap::new(n)?;
    let evolve = evolution_circuit(&map, slice.params, slice.t, slice.evolution)?;
    let mode = slice.mode;

    if mode == EstimatorMode::Exact {
        let mut base = prepare_yky_input(n)?;
        evolve.run(&mut base, &[]);
        return Ok(slice
            .js
            .iter()
            .map(|&j| {
                let mut s = base.clone();
                s.bell_project(map.a(j), map.b(j))?;
                let f = s.bell_projection_prob(map.a(0), map.b(0))?;
                OtocRecord::new(j, slice.t, f, mode, 0, None, None)
            })
            .collect());
    }

    if slice.shots == 0 {
        return Err(Error::InvalidConfig("shots must be positive in sampled modes"));
    }
    let noise = mode.noise(slice.noise);
    noise.validate()?;
    let mut pairs = alloc::vec![(map.a(0), map.b(0))];
    pairs.extend(slice.js.iter().map(|&j| (map.a(j), map.b(j))));
    // The preparation runs inside the circuit so that its CNOTs carry noise too.
    let mut circuit = preparation_circuit(&map);
    circuit.extend(evolve);
    circuit.extend(bell_rotation_circuit(&pairs));
    let wires: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let bits = wires.len();
    let initial = StateVector::zero(map.qubits());
    let mut engine = ShotEngine::new(&initial, &circuit, &wires);

    match mode {
        EstimatorMode::Sampled | EstimatorMode::Noisy => {
            let counts = engine.sample(slice.shots, &noise, rng)?;
            Ok((1..pairs.len())
                .map(|p| {
                    let j = slice.js[p - 1];
                    let cond = counts_zero(&counts, bits, &[p]);
                    let joint = counts_zero(&counts, bits, &[0, p]);
                    if cond == 0 {
                        return Err(Error::DegenerateConditioning(0.0));
                    }
                    let f = joint as f64 / cond as f64;
                    let se = (f * (1.0 - f) / cond as f64).sqrt();
                    let ci = wilson_halfwidth(joint, cond, Z95);
                    OtocRecord::new(j, slice.t, f, mode, slice.shots, Some(se), Some(ci))
                })
                .collect())
        }
        EstimatorMode::Averaged => {
            let trajectories = slice.shots as usize;
            let probes = pairs.len() - 1;
            let mut joint = alloc::vec![Vec::with_capacity(trajectories); probes];
            let mut cond = alloc::vec![Vec::with_capacity(trajectories); probes];
            let mut cache: alloc::collections::BTreeMap<Vec<Fault>, Vec<f64>> = Default::default();
            for _ in 0..trajectories {
                let faults = circuit.sample_faults(noise.p2, rng);
                let dist = cache.entry(faults).or_insert_with_key(|f| {
                    let mut d = engine.distribution(f);
                    apply_readout_noise(&mut d, bits, noise.p_read);
                    d
                });
                for p in 1..pairs.len() {
                    joint[p - 1].push(pairs_zero(dist, bits, &[0, p]));
                    cond[p - 1].push(pairs_zero(dist, bits, &[p]));
                }
            }
            Ok((0..probes)
                .map(|p| {
                    let (f, se) = ratio_estimate(&joint[p], &cond[p])?;
                    OtocRecord::new(slice.js[p], slice.t, f, mode, slice.shots, Some(se), Some(Z95 * se))
                })
                .collect())
        }
        EstimatorMode::Exact => unreachable!(),
    }
}

/// `mean(a) / mean(b)` with its delta-method standard error.
fn ratio_estimate(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    if mean_b <= MIN_CONDITIONING {
        return Err(Error::DegenerateConditioning(mean_b));
    }
    let r = mean_a / mean_b;
    let var = if a.len() > 1 {
        a.iter().zip(b).map(|(x, y)| (x - r * y).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok((r, (var / n).sqrt() / mean_b))
}

/// Runs the protocol for one probe site and time.
pub fn yky_run(spec: &ProtocolSpec) -> Result<OtocRecord> {
    spec.params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let slice = Slice {
        params: &spec.params,
        t: spec.t,
        evolution: &spec.evolution,
        js: &[spec.j],
        mode: spec.mode,
        noise: &spec.noise,
        shots: spec.shots,
    };
    evaluate_slice(&slice, &mut rng)?.pop().expect("one probe requested")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    pub params: ModelParams,
    pub js: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub mode: EstimatorMode,
    pub noise: NoiseSpec,
    pub shots: u64,
    pub seed: u64,
}

impl SurfaceSpec {
    pub fn exact(params: ModelParams, js: Vec<usize>, t_grid: Vec<f64>) -> Self {
        Self { params, js, t_grid, mode: EstimatorMode::Exact, noise: NoiseSpec::NONE, shots: 0, seed: 0 }
    }

    /// Random stream for the `index`-th time slice: ChaCha8 keyed by `seed`, stream `index`.
    /// Slices can therefore be evaluated in any order or in parallel.
    pub fn slice_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// One `(j, t)` cell of a surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub j: usize,
    pub t: f64,
    pub record: Result<OtocRecord>,
}

/// Evaluates one time slice of a surface.
pub fn surface_slice(spec: &SurfaceSpec, index: usize, evolution: &Evolution) -> Vec<SurfacePoint> {
    let t = spec.t_grid[index];
    let slice = Slice {
        params: &spec.params,
        t,
        evolution,
        js: &spec.js,
        mode: spec.mode,
        noise: &spec.noise,
        shots: spec.shots,
    };
    match evaluate_slice(&slice, &mut spec.slice_rng(index)) {
        Ok(records) => spec.js.iter().zip(records).map(|(&j, record)| SurfacePoint { j, t, record }).collect(),
        Err(e) => spec.js.iter().map(|&j| SurfacePoint { j, t, record: Err(e.clone()) }).collect(),
    }
}

/// `C_j(t)` over the whole grid, ordered by time then probe. `evolution_at(index, t)` supplies
/// the evolution for each slice; a failure there marks that slice's cells as failed.
pub fn otoc_surface(
    spec: &SurfaceSpec,
    mut evolution_at: impl FnMut(usize, f64) -> Result<Evolution>,
) -> Vec<SurfacePoint> {
    let mut out = Vec::with_capacity(spec.t_grid.len() * spec.js.len());
    for (index, &t) in spec.t_grid.iter().enumerate() {
        match evolution_at(index, t) {
            Ok(ev) => out.extend(surface_slice(spec, index, &ev)),
            Err(e) => out.extend(spec.js.iter().map(|&j| SurfacePoint { j, t, record: Err(e.clone()) })),
        }
    }
    out
}

/// [`otoc_surface`] with the exact propagator, diagonalising `H` once.
pub fn otoc_surface_exact(spec: &SurfaceSpec) -> Result<Vec<SurfacePoint>> {
    let prop = Propagator::for_model(&spec.params)?;
    Ok(otoc_surface(spec, |_, t| prop.at(t).map(Evolution::Unitary)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::model::exact_evolution;
    use crate::rtr::{brickwall_expand, haar_gate};
    use rand::Rng;

    fn random_params(n: usize, rng: &mut ChaCha8Rng) -> ModelParams {
        ModelParams::open(rng.random_range(0.3..1.5), rng.random_range(-2.5..2.5), rng.random_range(-2.0..2.0), n).unwrap()
    }

    #[test]
    fn commutator_arithmetic() {
        assert_eq!(squared_commutator(0.25).unwrap(), 0.0);
        assert_eq!(squared_commutator(0.5).unwrap(), 1.0);
        assert!(matches!(squared_commutator(0.0), Err(Error::NonPositiveFidelity(_))));
        assert!(squared_commutator(-1.0).is_err());
    }

    #[test]
    fn oracle_identity_and_local_unitaries() {
        for n in 2..=4 {
            for j in 2..=n {
                let v = averaged_otoc_oracle(&UnitaryOperator::identity(1 << n), j).unwrap();
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
        // Acting only on sites 2..n never reaches site 1.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = haar_gate(&mut rng);
        let tail = linalg::kron(&linalg::CMatrix::from_fn(4, 4, |a, b| g[(a, b)]), &linalg::identity(2));
        let u = UnitaryOperator::new(linalg::kron(&linalg::identity(2), &tail)).unwrap();
        for j in 2..=4 {
            assert!((averaged_otoc_oracle(&u, j).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(averaged_otoc_oracle(&u, 1), Err(Error::InvalidProbe { j: 1, n: 4 })));
        assert!(averaged_otoc_oracle(&u, 5).is_err());
    }

    #[test]
    fn exact_mode_matches_oracle_for_random_two_qubit_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let g = haar_gate(&mut rng);
            let u = UnitaryOperator::new(linalg::CMatrix::from_fn(4, 4, |a, b| g[(a, b)])).unwrap();
            let params = ModelParams::open(1.0, 0.0, 0.0, 2).unwrap();
            let spec = ProtocolSpec { evolution: Evolution::Unitary(u.clone()), ..ProtocolSpec::exact(params, 2, 0.0) };
            let rec = yky_run(&spec).unwrap();
            let oracle = averaged_otoc_oracle(&u, 2).unwrap();
            assert!((rec.otoc - oracle).abs() < 1e-10, "{} vs {oracle}", rec.otoc);
            assert!((rec.c - (2.0 - 2.0 * oracle)).abs() < 1e-10);
            assert!((4.0 * rec.f_epr * rec.otoc - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_mode_matches_oracle_for_hamiltonian_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in 0..20 {
            let n = 2 + case % 3;
            let params = random_params(n, &mut rng);
            let t = rng.random_range(0.0..3.0);
            let j = rng.random_range(2..=n);
            let rec = yky_run(&ProtocolSpec::exact(params, j, t)).unwrap();
            let u = exact_evolution(&build_xy_hamiltonian(&params).unwrap(), t).unwrap();
            let oracle = averaged_otoc_oracle(&u, j).unwrap();
            assert!((rec.otoc - oracle).abs() < 1e-10);
            assert!(oracle <= 1.0 + 1e-12 && rec.f_epr >= 0.25 - 1e-10);
            assert!((-1e-10..=2.25 + 1e-10).contains(&rec.c));
        }
    }

    #[test]
    fn time_zero_gives_quarter_fidelity() {
        let params = ModelParams::open(1.0, 2.1, 0.8, 4).unwrap();
        for j in 2..=4 {
            let rec = yky_run(&ProtocolSpec::exact(params, j, 0.0)).unwrap();
            assert!((rec.f_epr - 0.25).abs() < 1e-12 && rec.c.abs() < 1e-10);
        }
    }

    #[test]
    fn compiled_mode_matches_dense_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seq = GateSequence::new(3, (0..4).map(|_| haar_gate(&mut rng)).collect()).unwrap();
        let u = brickwall_expand(&seq);
        let params = ModelParams::open(1.0, 0.0, 0.0, 3).unwrap();
        for j in 2..=3 {
            let a = yky_run(&ProtocolSpec { evolution: Evolution::Compiled(seq.clone()), ..ProtocolSpec::exact(params, j, 0.0) }).unwrap();
            let b = yky_run(&ProtocolSpec { evolution: Evolution::Unitary(u.clone()), ..ProtocolSpec::exact(params, j, 0.0) }).unwrap();
            assert!((a.f_epr - b.f_epr).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_mode_agrees_with_exact_within_five_sigma() {
        let params = ModelParams::open(1.0, 0.0, 0.0, 3).unwrap();
        for (j, t) in [(2, 0.4), (3, 0.9)] {
            let exact = yky_run(&ProtocolSpec::exact(params, j, t)).unwrap();
            let spec = ProtocolSpec {
                mode: EstimatorMode::Sampled,
                shots: 100_000,
                seed: 11,
                ..ProtocolSpec::exact(params, j, t)
            };
            let sampled = yky_run(&spec).unwrap();
            let se = sampled.std_error.unwrap();
            assert!((sampled.f_epr - exact.f_epr).abs() < 5.0 * se, "{} vs {}", sampled.f_epr, exact.f_epr);
            assert!(sampled.ci_halfwidth.unwrap() > 0.0);
        }
    }

    #[test]
    fn sampled_mode_is_reproducible() {
        let params = ModelParams::open(1.0, 0.5, 0.5, 3).unwrap();
        let spec = ProtocolSpec {
            mode: EstimatorMode::Noisy,
            noise: NoiseSpec::new(0.02, 0.01).unwrap(),
            shots: 2000,
            seed: 5,
            ..ProtocolSpec::exact(params, 3, 0.6)
        };
        assert_eq!(yky_run(&spec).unwrap(), yky_run(&spec).unwrap());
    }

    #[test]
    fn shot_modes_need_shots_and_valid_probes() {
        let params = ModelParams::open(1.0, 0.5, 0.5, 3).unwrap();
        let spec = ProtocolSpec { mode: EstimatorMode::Sampled, ..ProtocolSpec::exact(params, 2, 0.3) };
        assert!(yky_run(&spec).is_err());
        assert!(matches!(yky_run(&ProtocolSpec::exact(params, 4, 0.3)), Err(Error::InvalidProbe { .. })));
    }

    #[test]
    fn averaged_noise_lowers_fidelity_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let seq = GateSequence::new(3, (0..3).map(|_| haar_gate(&mut rng)).collect()).unwrap();
        let params = ModelParams::open(1.0, 0.0, 0.0, 3).unwrap();
        let run = |p2: f64| {
            let spec = ProtocolSpec {
                evolution: Evolution::Compiled(seq.clone()),
                mode: EstimatorMode::Averaged,
                noise: NoiseSpec::new(p2, 0.0).unwrap(),
                shots: 4000,
                seed: 7,
                ..ProtocolSpec::exact(params, 3, 0.0)
            };
            yky_run(&spec).unwrap()
        };
        let (a, b, c) = (run(0.0), run(0.01), run(0.05));
        let tol = |x: &OtocRecord, y: &OtocRecord| 3.0 * (x.std_error.unwrap().powi(2) + y.std_error.unwrap().powi(2)).sqrt();
        assert!(a.f_epr >= b.f_epr - tol(&a, &b));
        assert!(b.f_epr >= c.f_epr - tol(&b, &c));
        assert!(a.f_epr > c.f_epr);
    }

    #[test]
    fn ratio_estimate_recovers_constant_ratio() {
        let a = [0.1, 0.2, 0.3];
        let b = [0.2, 0.4, 0.6];
        let (r, se) = ratio_estimate(&a, &b).unwrap();
        assert!((r - 0.5).abs() < 1e-15 && se < 1e-15);
        assert!(ratio_estimate(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn wilson_interval_shrinks_with_trials() {
        let wide = wilson_halfwidth(50, 100, Z95);
        let narrow = wilson_halfwidth(5000, 10_000, Z95);
        assert!(narrow < wide && (wide - 0.096).abs() < 0.002);
        assert!(wilson_halfwidth(0, 100, Z95) > 0.0);
    }

    #[test]
    fn surface_first_column_vanishes_and_is_parity_symmetric() {
        let params = ModelParams::open(1.0, 0.0, 0.0, 4).unwrap();
        let grid: Vec<f64> = (0..8).map(|k| 0.25 * k as f64).collect();
        let spec = SurfaceSpec::exact(params, alloc::vec![2, 3, 4], grid.clone());
        let surface = otoc_surface_exact(&spec).unwrap();
        assert_eq!(surface.len(), 24);
        for p in surface.iter().filter(|p| p.t == 0.0) {
            assert!(p.record.as_ref().unwrap().c.abs() < 1e-10);
        }
        let mut flipped = params;
        flipped.h = -flipped.h;
        let mirrored = otoc_surface_exact(&SurfaceSpec::exact(flipped, alloc::vec![2, 3, 4], grid)).unwrap();
        for (a, b) in surface.iter().zip(&mirrored) {
            assert!((a.record.as_ref().unwrap().c - b.record.as_ref().unwrap().c).abs() < 1e-9);
        }
    }

    #[test]
    fn surface_marks_failed_slices() {
        let params = ModelParams::open(1.0, 0.0, 0.0, 3).unwrap();
        let spec = SurfaceSpec::exact(params, alloc::vec![2, 3], alloc::vec![0.0, 0.5]);
        let surface = otoc_surface(&spec, |i, _| if i == 1 { Err(Error::EigenFailure) } else { Ok(Evolution::Exact) });
        assert!(surface[0].record.is_ok() && surface[1].record.is_ok());
        assert!(surface[2].record.is_err() && surface[3].record.is_err());
    }

    #[test]
    fn slice_matches_single_runs() {
        let params = ModelParams::open(0.8, 1.2, 0.4, 4).unwrap();
        let spec = SurfaceSpec::exact(params, alloc::vec![2, 3, 4], alloc::vec![0.7]);
        let slice = surface_slice(&spec, 0, &Evolution::Exact);
        for p in slice {
            let single = yky_run(&ProtocolSpec::exact(params, p.j, 0.7)).unwrap();
            assert!((p.record.unwrap().f_epr - single.f_epr).abs() < 1e-13);
        }
    }
}
