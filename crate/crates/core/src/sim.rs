//! Statevector simulator for the doubled register of the teleportation protocol.
//!
//! The register is laid out top to bottom as `[A_0, A_1, ..., A_n, B_n, ..., B_1, B_0]`;
//! wire 0 is the most significant bit of the amplitude index. Physics site `k` of the `A`
//! copy sits on wire `k` and of the `B` copy on wire `2n + 1 - k`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::linalg::{self, apply_dense, apply_gate2_strided, apply_gate4_strided, CMatrix, Gate2, Gate4, C64, ONE, ZERO};
use crate::model::{Pauli, UnitaryOperator};
use crate::rtr::GateSequence;
use crate::{Error, Result};

const NORM_TOL: f64 = 1e-10;
const GATE_TOL: f64 = 1e-8;
/// Smallest conditioning probability accepted when a post-measurement state is formed.
pub const MIN_CONDITIONING: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Label {
    A(usize),
    B(usize),
}

impl core::fmt::Display for Label {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Label::A(k) => write!(f, "A{k}"),
            Label::B(k) => write!(f, "B{k}"),
        }
    }
}

/// Wire layout of the doubled register for an `n`-site chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterMap {
    n: usize,
}

impl RegisterMap {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams("the doubled register needs n >= 2"));
        }
        let map = Self { n };
        let mut seen = alloc::vec![false; map.qubits()];
        for w in 0..map.qubits() {
            let label = map.label(w);
            assert_eq!(map.wire(label), w);
            assert!(!core::mem::replace(&mut seen[w], true));
        }
        Ok(map)
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn qubits(&self) -> usize {
        2 * self.n + 2
    }

    pub fn wire(&self, label: Label) -> usize {
        match label {
            Label::A(k) => k,
            Label::B(0) => 2 * self.n + 1,
            Label::B(k) => 2 * self.n + 1 - k,
        }
    }

    pub fn label(&self, wire: usize) -> Label {
        if wire <= self.n {
            Label::A(wire)
        } else if wire == 2 * self.n + 1 {
            Label::B(0)
        } else {
            Label::B(2 * self.n + 1 - wire)
        }
    }

    pub fn a(&self, k: usize) -> usize {
        self.wire(Label::A(k))
    }

    pub fn b(&self, k: usize) -> usize {
        self.wire(Label::B(k))
    }

    pub fn labels(&self) -> Vec<Label> {
        (0..self.qubits()).map(|w| self.label(w)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<C64>,
    register: Option<RegisterMap>,
}

impl StateVector {
    /// `|0...0>` on `qubits` wires.
    pub fn zero(qubits: usize) -> Self {
        let mut amps = alloc::vec![ZERO; 1 << qubits];
        amps[0] = ONE;
        Self { qubits, amps, register: None }
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::DimensionMismatch { expected: amps.len().next_power_of_two(), actual: amps.len() });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParams("amplitudes are not normalised"));
        }
        Ok(Self { qubits: amps.len().trailing_zeros() as usize, amps, register: None })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn register(&self) -> Option<&RegisterMap> {
        self.register.as_ref()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    #[inline]
    pub fn mask(&self, wire: usize) -> usize {
        1 << (self.qubits - 1 - wire)
    }

    fn check_wire(&self, wire: usize) -> Result<()> {
        if wire >= self.qubits {
            return Err(Error::SiteOutOfRange { site: wire, n: self.qubits });
        }
        Ok(())
    }

    fn check_pair(&self, qa: usize, qb: usize) -> Result<()> {
        self.check_wire(qa)?;
        self.check_wire(qb)?;
        if qa == qb {
            return Err(Error::InvalidTargets);
        }
        Ok(())
    }

    fn doubled(&self) -> Result<RegisterMap> {
        self.register.ok_or(Error::InvalidConfig("state has no doubled-register layout"))
    }

    pub fn apply_gate2(&mut self, g: &Gate2, wire: usize) -> Result<()> {
        self.check_wire(wire)?;
        let defect = linalg::unitarity_defect2(g);
        if defect > GATE_TOL {
            return Err(Error::NotUnitary(defect));
        }
        self.gate2(g, wire);
        Ok(())
    }

    /// Two-qubit gate with `qa` as the more significant bit of the gate's index.
    pub fn apply_gate4(&mut self, g: &Gate4, qa: usize, qb: usize) -> Result<()> {
        self.check_pair(qa, qb)?;
        let defect = linalg::unitarity_defect4(g);
        if defect > GATE_TOL {
            return Err(Error::NotUnitary(defect));
        }
        self.gate4(g, qa, qb);
        Ok(())
    }

    #[inline]
    fn gate2(&mut self, g: &Gate2, wire: usize) {
        let (dim, mask) = (self.amps.len(), self.mask(wire));
        apply_gate2_strided(&mut self.amps, 0, 1, dim, mask, g);
    }

    #[inline]
    fn gate4(&mut self, g: &Gate4, qa: usize, qb: usize) {
        let (dim, hi, lo) = (self.amps.len(), self.mask(qa), self.mask(qb));
        apply_gate4_strided(&mut self.amps, 0, 1, dim, hi, lo, g);
    }

    fn dense(&mut self, wires: &[usize], m: &CMatrix) {
        let masks: Vec<usize> = wires.iter().map(|&w| self.mask(w)).collect();
        let dim = self.amps.len();
        apply_dense(&mut self.amps, dim, &masks, m);
    }

    /// `U` on `A_1..A_n` and, with `conjugate_copy`, `U^*` on `B_1..B_n`.
    pub fn apply_unitary_pair(&mut self, u: &UnitaryOperator, conjugate_copy: bool) -> Result<()> {
        let map = self.doubled()?;
        let n = map.sites();
        if u.dim() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, actual: u.dim() });
        }
        let a: Vec<usize> = (1..=n).map(|k| map.a(k)).collect();
        self.dense(&a, u.matrix());
        if conjugate_copy {
            let b: Vec<usize> = (1..=n).map(|k| map.b(k)).collect();
            self.dense(&b, &u.matrix().map(|z| z.conj()));
        }
        Ok(())
    }

    /// Gate-by-gate version of [`Self::apply_unitary_pair`] for a compiled circuit.
    pub fn apply_sequence_pair(&mut self, seq: &GateSequence, conjugate_copy: bool) -> Result<()> {
        let map = self.doubled()?;
        if seq.qubits() != map.sites() {
            return Err(Error::DimensionMismatch { expected: map.sites(), actual: seq.qubits() });
        }
        for (g, s) in seq.placements() {
            self.gate4(g, map.a(s), map.a(s + 1));
            if conjugate_copy {
                self.gate4(&g.conjugate(), map.b(s), map.b(s + 1));
            }
        }
        Ok(())
    }

    /// `<psi| (|phi><phi| on (qa, qb)) |psi>` with `|phi> = (|00> + |11>)/sqrt 2`.
    pub fn bell_projection_prob(&self, qa: usize, qb: usize) -> Result<f64> {
        self.check_pair(qa, qb)?;
        let (ma, mb) = (self.mask(qa), self.mask(qb));
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & (ma | mb) == 0)
            .map(|(i, a)| (a + self.amps[i | ma | mb]).norm_sqr())
            .sum::<f64>()
            / 2.0)
    }

    /// Projects onto the Bell pair on `(qa, qb)`, renormalises and returns the probability.
    pub fn bell_project(&mut self, qa: usize, qb: usize) -> Result<f64> {
        let p = self.bell_projection_prob(qa, qb)?;
        if p <= MIN_CONDITIONING {
            return Err(Error::DegenerateConditioning(p));
        }
        let (ma, mb) = (self.mask(qa), self.mask(qb));
        let scale = 1.0 / (2.0 * p.sqrt());
        for i in 0..self.amps.len() {
            if i & (ma | mb) != 0 {
                continue;
            }
            let s = (self.amps[i] + self.amps[i | ma | mb]) * scale;
            self.amps[i] = s;
            self.amps[i | ma | mb] = s;
            self.amps[i | ma] = ZERO;
            self.amps[i | mb] = ZERO;
        }
        Ok(p)
    }

    /// Joint distribution of the computational readout of `wires`; the first wire is the
    /// most significant bit of the outcome index.
    pub fn outcome_distribution(&self, wires: &[usize]) -> Vec<f64> {
        let masks: Vec<usize> = wires.iter().map(|&w| self.mask(w)).collect();
        let mut dist = alloc::vec![0.0; 1 << wires.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let outcome = masks.iter().fold(0, |acc, &m| (acc << 1) | usize::from(i & m != 0));
            dist[outcome] += a.norm_sqr();
        }
        dist
    }
}

/// Two-qubit depolarizing probability per gate and readout bit-flip probability.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoiseSpec {
    pub p2: f64,
    pub p_read: f64,
}

impl NoiseSpec {
    pub const NONE: Self = Self { p2: 0.0, p_read: 0.0 };

    pub fn new(p2: f64, p_read: f64) -> Result<Self> {
        let spec = Self { p2, p_read };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p2) || !(0.0..=1.0).contains(&self.p_read) {
            return Err(Error::InvalidParams("noise probabilities must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p2 == 0.0 && self.p_read == 0.0
    }
}

pub fn hadamard() -> Gate2 {
    let s = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    Gate2::new(s, s, s, -s)
}

/// CNOT with the control on the gate's more significant bit.
pub fn cnot() -> Gate4 {
    let mut g = Gate4::zeros();
    g[(0, 0)] = ONE;
    g[(1, 1)] = ONE;
    g[(2, 3)] = ONE;
    g[(3, 2)] = ONE;
    g
}

/// The `index`-th two-qubit Pauli, `index` in `0..16` with `P_hi = index / 4` and
/// `P_lo = index % 4` in the order `I, X, Y, Z`.
pub fn two_qubit_pauli(index: u8) -> Gate4 {
    let p = |k: u8| linalg::pauli_matrix(Pauli::ALL[k as usize]);
    linalg::kron2(&p(index / 4), &p(index % 4))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    One { wire: usize, gate: Gate2 },
    /// Noisy two-qubit gate; `hi` is the more significant bit of the gate index.
    Two { hi: usize, lo: usize, gate: Gate4 },
    /// Noiseless dense block on `wires` (first wire is the most significant bit).
    Dense { wires: Vec<usize>, matrix: CMatrix },
}

/// A Pauli error inserted right after the `slot`-th two-qubit gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fault {
    pub slot: u32,
    pub pauli: u8,
}

/// A straight-line circuit whose two-qubit gates are the noise locations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub ops: Vec<Op>,
}

impl Circuit {
    pub fn push(&mut self, op: Op) {
        self.ops.push(op);
    }

    pub fn extend(&mut self, other: Circuit) {
        self.ops.extend(other.ops);
    }

    pub fn noise_slots(&self) -> usize {
        self.ops.iter().filter(|op| matches!(op, Op::Two { .. })).count()
    }

    /// Runs the circuit, inserting `faults` (sorted by slot).
    pub fn run(&self, state: &mut StateVector, faults: &[Fault]) {
        let mut slot = 0u32;
        let mut pending = faults.iter().peekable();
        for op in &self.ops {
            match op {
                Op::One { wire, gate } => state.gate2(gate, *wire),
                Op::Dense { wires, matrix } => state.dense(wires, matrix),
                Op::Two { hi, lo, gate } => {
                    state.gate4(gate, *hi, *lo);
                    while let Some(f) = pending.next_if(|f| f.slot == slot) {
                        state.gate4(&two_qubit_pauli(f.pauli), *hi, *lo);
                    }
                    slot += 1;
                }
            }
        }
    }

    /// Independently for every slot, a uniformly random non-identity Pauli with probability `p2`.
    pub fn sample_faults(&self, p2: f64, rng: &mut impl Rng) -> Vec<Fault> {
        if p2 <= 0.0 {
            return Vec::new();
        }
        let mut faults = Vec::new();
        for slot in 0..self.noise_slots() as u32 {
            if rng.random::<f64>() < p2 {
                faults.push(Fault { slot, pauli: rng.random_range(1..16) });
            }
        }
        faults
    }
}

/// `H` then CNOT for every Bell pair of the protocol input: `(A_0, A_1)`, `(A_k, B_k)` for
/// `k = 2..n` and `(B_1, B_0)`.
pub fn preparation_circuit(map: &RegisterMap) -> Circuit {
    let n = map.sites();
    let mut pairs = alloc::vec![(map.a(0), map.a(1))];
    pairs.extend((2..=n).map(|k| (map.a(k), map.b(k))));
    pairs.push((map.b(1), map.b(0)));
    let mut c = Circuit::default();
    for (control, target) in pairs {
        c.push(Op::One { wire: control, gate: hadamard() });
        c.push(Op::Two { hi: control, lo: target, gate: cnot() });
    }
    c
}

/// `U` on the `A` copy and `U^*` on the `B` copy, as dense blocks.
pub fn unitary_pair_circuit(map: &RegisterMap, u: &UnitaryOperator) -> Result<Circuit> {
    let n = map.sites();
    if u.dim() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, actual: u.dim() });
    }
    let mut c = Circuit::default();
    c.push(Op::Dense { wires: (1..=n).map(|k| map.a(k)).collect(), matrix: u.matrix().clone() });
    c.push(Op::Dense { wires: (1..=n).map(|k| map.b(k)).collect(), matrix: u.matrix().map(|z| z.conj()) });
    Ok(c)
}

/// A compiled sequence on the `A` copy and its entrywise conjugate on the `B` copy, gate by
/// gate in the same order.
pub fn sequence_pair_circuit(map: &RegisterMap, seq: &GateSequence) -> Result<Circuit> {
    if seq.qubits() != map.sites() {
        return Err(Error::DimensionMismatch { expected: map.sites(), actual: seq.qubits() });
    }
    let mut c = Circuit::default();
    for (g, s) in seq.placements() {
        c.push(Op::Two { hi: map.a(s), lo: map.a(s + 1), gate: *g });
        c.push(Op::Two { hi: map.b(s), lo: map.b(s + 1), gate: g.conjugate() });
    }
    Ok(c)
}

/// Rotates each Bell pair `(qa, qb)` to the computational basis (CNOT then `H` on `qa`), so
/// that outcome `00` is the projection onto `(|00> + |11>)/sqrt 2`.
pub fn bell_rotation_circuit(pairs: &[(usize, usize)]) -> Circuit {
    let mut c = Circuit::default();
    for &(qa, qb) in pairs {
        c.push(Op::Two { hi: qa, lo: qb, gate: cnot() });
        c.push(Op::One { wire: qa, gate: hadamard() });
    }
    c
}

/// The protocol input state `|Psi>` on the doubled register.
pub fn prepare_yky_input(n: usize) -> Result<StateVector> {
    let map = RegisterMap::new(n)?;
    let mut state = StateVector::zero(map.qubits());
    state.register = Some(map);
    preparation_circuit(&map).run(&mut state, &[]);
    Ok(state)
}

/// Sequence on sites `1..=n` placed on wires `first_wire..first_wire + n`, with a random
/// two-qubit Pauli after each gate with probability `noise.p2`.
pub fn apply_noisy_sequence(
    state: &mut StateVector,
    seq: &GateSequence,
    first_wire: usize,
    noise: &NoiseSpec,
    rng: &mut impl Rng,
) -> Result<()> {
    noise.validate()?;
    if first_wire + seq.qubits() > state.qubits() {
        return Err(Error::DimensionMismatch { expected: first_wire + seq.qubits(), actual: state.qubits() });
    }
    let mut c = Circuit::default();
    for (g, s) in seq.placements() {
        c.push(Op::Two { hi: first_wire + s - 1, lo: first_wire + s, gate: *g });
    }
    let faults = c.sample_faults(noise.p2, rng);
    c.run(state, &faults);
    Ok(())
}

/// Per-bit readout flips applied to a distribution over `bits`-bit outcomes.
pub fn apply_readout_noise(dist: &mut [f64], bits: usize, p_read: f64) {
    if p_read == 0.0 {
        return;
    }
    for b in 0..bits {
        let m = 1 << b;
        for i in 0..dist.len() {
            if i & m == 0 {
                let (x, y) = (dist[i], dist[i | m]);
                dist[i] = (1.0 - p_read) * x + p_read * y;
                dist[i | m] = (1.0 - p_read) * y + p_read * x;
            }
        }
    }
}

/// Outcome counts keyed by bitstring, one character per measured wire.
pub type CountsTable = BTreeMap<String, u64>;

pub fn outcome_string(outcome: usize, bits: usize) -> String {
    (0..bits).rev().map(|b| if outcome >> b & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn counts_table(counts: &[u64], bits: usize) -> CountsTable {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(o, &c)| (outcome_string(o, bits), c))
        .collect()
}

/// Monte-Carlo shot engine: every shot draws its own fault pattern, runs that trajectory of
/// `circuit` from `initial`, reads out `wires` and flips each bit with `noise.p_read`.
/// Trajectory distributions are cached per fault pattern, so the fault-free trajectory is
/// simulated once.
pub struct ShotEngine<'a> {
    initial: &'a StateVector,
    circuit: &'a Circuit,
    wires: &'a [usize],
    cache: BTreeMap<Vec<Fault>, WeightedIndex<f64>>,
}

impl<'a> ShotEngine<'a> {
    pub fn new(initial: &'a StateVector, circuit: &'a Circuit, wires: &'a [usize]) -> Self {
        Self { initial, circuit, wires, cache: BTreeMap::new() }
    }

    pub fn distribution(&self, faults: &[Fault]) -> Vec<f64> {
        let mut state = self.initial.clone();
        self.circuit.run(&mut state, faults);
        state.outcome_distribution(self.wires)
    }

    /// Counts indexed by outcome (first wire is the most significant bit).
    pub fn sample(&mut self, shots: u64, noise: &NoiseSpec, rng: &mut impl Rng) -> Result<Vec<u64>> {
        noise.validate()?;
        let bits = self.wires.len();
        let mut counts = alloc::vec![0u64; 1 << bits];
        for _ in 0..shots {
            let faults = self.circuit.sample_faults(noise.p2, rng);
            if !self.cache.contains_key(&faults) {
                let dist = self.distribution(&faults);
                let sampler = WeightedIndex::new(&dist).map_err(|_| Error::InvalidParams("empty distribution"))?;
                self.cache.insert(faults.clone(), sampler);
            }
            let mut outcome = self.cache[&faults].sample(rng);
            if noise.p_read > 0.0 {
                for b in 0..bits {
                    if rng.random::<f64>() < noise.p_read {
                        outcome ^= 1 << b;
                    }
                }
            }
            counts[outcome] += 1;
        }
        Ok(counts)
    }
}

/// Bell-basis measurement of `pairs` on `state` over `shots` shots. The rotation CNOTs carry
/// depolarizing noise and every readout bit is flipped with `noise.p_read`. Bitstrings list
/// `qa qb` for each pair in order.
pub fn sample_counts(
    state: &StateVector,
    pairs: &[(usize, usize)],
    shots: u64,
    noise: &NoiseSpec,
    rng: &mut impl Rng,
) -> Result<CountsTable> {
    if shots == 0 {
        return Err(Error::InvalidConfig("shots must be positive"));
    }
    for &(qa, qb) in pairs {
        state.check_pair(qa, qb)?;
    }
    let circuit = bell_rotation_circuit(pairs);
    let wires: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let counts = ShotEngine::new(state, &circuit, &wires).sample(shots, noise, rng)?;
    Ok(counts_table(&counts, wires.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::model::{build_xy_hamiltonian, exact_evolution, ModelParams};
    use crate::rtr::{brickwall_expand, haar_gate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_state(q: usize, rng: &mut ChaCha8Rng) -> StateVector {
        let mut amps: Vec<C64> = (0..1 << q)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn register_map_matches_layout() {
        let map = RegisterMap::new(3).unwrap();
        assert_eq!(map.qubits(), 8);
        let labels = map.labels();
        assert_eq!(
            labels,
            [Label::A(0), Label::A(1), Label::A(2), Label::A(3), Label::B(3), Label::B(2), Label::B(1), Label::B(0)]
        );
        assert!(RegisterMap::new(1).is_err());
    }

    #[test]
    fn prepared_input_is_a_product_of_bell_pairs() {
        for n in 2..=5 {
            let s = prepare_yky_input(n).unwrap();
            let map = *s.register().unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            let mut pairs = alloc::vec![(map.a(0), map.a(1)), (map.b(0), map.b(1))];
            pairs.extend((2..=n).map(|k| (map.a(k), map.b(k))));
            for (a, b) in pairs {
                assert!((s.bell_projection_prob(a, b).unwrap() - 1.0).abs() < 1e-12);
            }
            for w in 0..map.qubits() {
                let d = s.outcome_distribution(&[w]);
                assert!((d[0] - 0.5).abs() < 1e-12);
            }
        }
        assert!(prepare_yky_input(1).is_err());
    }

    #[test]
    fn basic_gates() {
        let mut s = StateVector::zero(3);
        let before = s.clone();
        s.apply_gate4(&Gate4::identity(), 0, 2).unwrap();
        assert_eq!(s, before);
        let x = linalg::pauli_matrix(Pauli::X);
        s.apply_gate2(&x, 1).unwrap();
        assert_eq!(s.amplitudes()[0b010], ONE);
        let mut r = rng(1);
        let mut s = random_state(4, &mut r);
        let orig = s.clone();
        s.apply_gate4(&cnot(), 3, 1).unwrap();
        s.apply_gate4(&cnot(), 3, 1).unwrap();
        assert!(s.amplitudes().iter().zip(orig.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-15));
        assert!(matches!(s.apply_gate4(&cnot(), 1, 1), Err(Error::InvalidTargets)));
        assert!(s.apply_gate4(&cnot(), 1, 4).is_err());
        let bad = Gate4::identity() * C64::new(1.01, 0.0);
        assert!(matches!(s.apply_gate4(&bad, 0, 1), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn unitary_gates_preserve_norm() {
        let mut r = rng(2);
        let mut s = random_state(6, &mut r);
        for k in 0..30 {
            let g = haar_gate(&mut r);
            s.apply_gate4(&g, k % 6, (k + 1 + k / 6) % 6).unwrap_or(());
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn bell_probability_examples() {
        let mut s = StateVector::zero(2);
        assert!((s.bell_projection_prob(0, 1).unwrap() - 0.5).abs() < 1e-15);
        s.apply_gate2(&hadamard(), 0).unwrap();
        s.apply_gate4(&cnot(), 0, 1).unwrap();
        assert!((s.bell_projection_prob(0, 1).unwrap() - 1.0).abs() < 1e-15);
        let h = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        let psi = StateVector::from_amplitudes(alloc::vec![ZERO, h, h, ZERO]).unwrap();
        assert!(psi.bell_projection_prob(0, 1).unwrap().abs() < 1e-15);
        let mut psi = psi;
        assert!(matches!(psi.bell_project(0, 1), Err(Error::DegenerateConditioning(_))));
    }

    #[test]
    fn projection_leaves_a_bell_pair() {
        let mut r = rng(3);
        let mut s = random_state(5, &mut r);
        let p = s.bell_project(1, 3).unwrap();
        assert!(p > 0.0);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((s.bell_projection_prob(1, 3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_pair_leaves_state_unchanged() {
        let mut s = prepare_yky_input(3).unwrap();
        let before = s.clone();
        s.apply_unitary_pair(&UnitaryOperator::identity(8), true).unwrap();
        assert_eq!(s, before);
        assert!(s.apply_unitary_pair(&UnitaryOperator::identity(4), true).is_err());
    }

    #[test]
    fn cross_pairs_are_invariant_under_u_and_conjugate() {
        // U acting on site 2 only: A_2 B_2 stays a Bell pair.
        let phase = Gate2::new(ONE, ZERO, ZERO, linalg::I);
        let g = linalg::kron2(&linalg::pauli_matrix(Pauli::I), &(hadamard() * phase));
        let local = CMatrix::from_fn(4, 4, |a, b| g[(a, b)]);
        let u = UnitaryOperator::new(local).unwrap();
        let mut s = prepare_yky_input(2).unwrap();
        let map = *s.register().unwrap();
        s.apply_unitary_pair(&u, true).unwrap();
        assert!((s.bell_projection_prob(map.a(2), map.b(2)).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn compiled_sequence_matches_dense_application() {
        let mut r = rng(5);
        for n in 2..=4 {
            let seq = GateSequence::new(n, (0..3).map(|_| haar_gate(&mut r)).collect()).unwrap();
            let u = brickwall_expand(&seq);
            let mut dense = prepare_yky_input(n).unwrap();
            dense.apply_unitary_pair(&u, true).unwrap();
            let mut gates = prepare_yky_input(n).unwrap();
            gates.apply_sequence_pair(&seq, true).unwrap();
            let diff = dense.amplitudes().iter().zip(gates.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-9);
        }
    }

    #[test]
    fn circuit_helpers_match_direct_methods() {
        let p = ModelParams::open(1.0, 0.5, 0.3, 3).unwrap();
        let u = exact_evolution(&build_xy_hamiltonian(&p).unwrap(), 0.7).unwrap();
        let mut a = prepare_yky_input(3).unwrap();
        let map = *a.register().unwrap();
        let mut b = a.clone();
        a.apply_unitary_pair(&u, true).unwrap();
        unitary_pair_circuit(&map, &u).unwrap().run(&mut b, &[]);
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_bell_pair_always_reads_zero_zero() {
        let s = prepare_yky_input(2).unwrap();
        let map = *s.register().unwrap();
        let counts = sample_counts(&s, &[(map.a(0), map.a(1))], 1000, &NoiseSpec::NONE, &mut rng(6)).unwrap();
        assert_eq!(counts.len(), 1);
        assert_eq!(counts["00"], 1000);
        assert!(sample_counts(&s, &[(0, 1)], 0, &NoiseSpec::NONE, &mut rng(6)).is_err());
    }

    #[test]
    fn readout_flip_randomises_a_bit() {
        let s = StateVector::zero(2);
        let shots = 20_000u64;
        let noise = NoiseSpec::new(0.0, 0.5).unwrap();
        let counts = sample_counts(&s, &[(0, 1)], shots, &noise, &mut rng(7)).unwrap();
        // After the Bell rotation of |00> the first bit is uniform and the second is 0;
        // with p_read = 1/2 both marginals are 1/2.
        for bit in 0..2 {
            let ones: u64 = counts.iter().filter(|(k, _)| k.as_bytes()[bit] == b'1').map(|(_, &c)| c).sum();
            let sigma = (shots as f64 * 0.25).sqrt();
            assert!((ones as f64 - shots as f64 / 2.0).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn sampled_frequency_converges_to_projection_probability() {
        let mut r = rng(8);
        let s = random_state(4, &mut r);
        let p = s.bell_projection_prob(2, 0).unwrap();
        let shots = 100_000u64;
        let counts = sample_counts(&s, &[(2, 0)], shots, &NoiseSpec::NONE, &mut r).unwrap();
        let hits = *counts.get("00").unwrap_or(&0) as f64;
        let sigma = (shots as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - shots as f64 * p).abs() < 5.0 * sigma);
    }

    #[test]
    fn readout_noise_on_distribution_matches_sampling_law() {
        let mut dist = alloc::vec![1.0, 0.0, 0.0, 0.0];
        apply_readout_noise(&mut dist, 2, 0.1);
        let expect = [0.81, 0.09, 0.09, 0.01];
        assert!(dist.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn zero_noise_sequence_matches_noiseless_application() {
        let mut r = rng(9);
        let seq = GateSequence::new(3, (0..4).map(|_| haar_gate(&mut r)).collect()).unwrap();
        let mut a = random_state(4, &mut r);
        let mut b = a.clone();
        apply_noisy_sequence(&mut a, &seq, 1, &NoiseSpec::NONE, &mut r).unwrap();
        let mut c = Circuit::default();
        for (g, s) in seq.placements() {
            c.push(Op::Two { hi: s, lo: s + 1, gate: *g });
        }
        c.run(&mut b, &[]);
        assert_eq!(a, b);
    }

    #[test]
    fn full_depolarizing_randomises_the_pair() {
        // |00> through one layer with p2 = 1: the averaged reduced state is I/4.
        let seq = GateSequence::identity(2, 1).unwrap();
        let noise = NoiseSpec::new(1.0, 0.0).unwrap();
        let mut r = rng(10);
        let trials = 10_000;
        let mut rho = CMatrix::zeros(4, 4);
        for _ in 0..trials {
            let mut s = StateVector::zero(2);
            apply_noisy_sequence(&mut s, &seq, 0, &noise, &mut r).unwrap();
            let v = s.amplitudes();
            rho += CMatrix::from_fn(4, 4, |a, b| v[a] * v[b].conj());
        }
        rho /= C64::new(trials as f64, 0.0);
        let purity = (&rho * &rho).trace().re;
        // Only the 15 non-identity Paulis are drawn, so the diagonal is (3, 4, 4, 4) / 15 and
        // the purity 57/225 rather than exactly 1/4.
        assert!((purity - 57.0 / 225.0).abs() < 0.01, "purity {purity}");
        assert!(max_abs(&(rho.clone() - rho.adjoint())) < 1e-12);
    }

    #[test]
    fn fault_insertion_applies_pauli() {
        let mut c = Circuit::default();
        c.push(Op::Two { hi: 0, lo: 1, gate: Gate4::identity() });
        let mut s = StateVector::zero(2);
        // Pauli index 4 = X on hi, I on lo.
        c.run(&mut s, &[Fault { slot: 0, pauli: 4 }]);
        assert_eq!(s.amplitudes()[0b10], ONE);
        assert_eq!(c.noise_slots(), 1);
    }
}
