//! Entanglement-swapping Bell experiment.
//!
//! Two sources each emit `phi+`, one pair to Alice and Bob, the other to Bob
//! and Charlie. Bob measures his two qubits in the Bell basis, Alice measures
//! one of three and Charlie one of six dichotomic observables. Subsystems are
//! ordered A, B1, B2, C.
//!
//! Every grid point is evaluated in a fixed nested order
//! (b, a, c, x, z), so tables are bitwise reproducible.

use std::fmt;
use std::str::FromStr;

use ndarray::array;
use num_complex::Complex64;

use crate::complexqm::{
    bell_measurement, bell_state, born_probability, eigenprojectors, pauli_matrix, BellState, ComplexOperator,
    ComplexState, MeasurementEnsemble, OperatorKind, Pauli, ZERO_PROBABILITY,
};
use crate::error::{Error, Result};
use crate::realmap::{flag_tensor_ops, flag_tensor_states, s_map, t_map, RealOperator, RealState};
use crate::realqm::{real_born, real_collapse, reduced_pure_state, RealDensity};
use crate::tensor::{kron, outer, CMatrix, RMatrix, RVector, SystemShape, TOLERANCE};

/// `6 sqrt 2`, the value reached by complex quantum theory.
pub const QUANTUM_VALUE: f64 = 6.0 * std::f64::consts::SQRT_2;

/// Upper bound on the functional for real tensor-product models. Cited, not
/// derived here.
pub const REAL_TENSOR_BOUND: f64 = 7.6605;

/// Bob's outcome labels, indexed by `b = 2 b1 + b2`.
pub const BOB_OUTCOMES: [&str; 4] = ["00", "01", "10", "11"];

pub const ALICE_SETTINGS: usize = 3;
pub const CHARLIE_SETTINGS: usize = 6;

/// Conditional correlators `E(ac | b = 00)` for the default settings that
/// enter the functional, as `(x, z, value)`.
pub const REFERENCE_S00: [(usize, usize, f64); 12] = {
    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;
    [
        (1, 1, H),
        (1, 2, H),
        (2, 1, H),
        (2, 2, -H),
        (1, 3, H),
        (1, 4, H),
        (3, 3, -H),
        (3, 4, H),
        (2, 5, H),
        (2, 6, H),
        (3, 5, -H),
        (3, 6, H),
    ]
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Complex,
    Real,
    /// The real formalism evaluated on expanded canonical vectors instead of
    /// compact pairs.
    RealExpanded,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex" => Ok(Backend::Complex),
            "real" => Ok(Backend::Real),
            "real-expanded" => Ok(Backend::RealExpanded),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Complex => "complex",
            Backend::Real => "real",
            Backend::RealExpanded => "real-expanded",
        })
    }
}

/// Sources, Bob's ensemble and the observables of Alice and Charlie.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// `[source AB1, source B2C]`, two-qubit states.
    pub sources: [ComplexState; 2],
    pub bob: MeasurementEnsemble,
    pub alice: Vec<ComplexOperator>,
    pub charlie: Vec<ComplexOperator>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let q1 = SystemShape::qubits(1)?;
        let q2 = SystemShape::qubits(2)?;
        for s in &self.sources {
            if s.shape() != &q2 {
                return Err(Error::InvalidShape(format!("source has shape [{}], expected [2,2]", s.shape())));
            }
        }
        if self.bob.shape() != &q2 || self.bob.labels() != BOB_OUTCOMES {
            return Err(Error::InvalidEnsemble("Bob needs four two-qubit outcomes labelled 00..11".into()));
        }
        if self.alice.len() != ALICE_SETTINGS || self.charlie.len() != CHARLIE_SETTINGS {
            return Err(Error::InvalidShape(format!(
                "expected {ALICE_SETTINGS} and {CHARLIE_SETTINGS} observables, got {} and {}",
                self.alice.len(),
                self.charlie.len()
            )));
        }
        for obs in self.alice.iter().chain(&self.charlie) {
            if obs.shape() != &q1 {
                return Err(Error::InvalidShape(format!("observable has shape [{}]", obs.shape())));
            }
            let r = obs.kind_residual(OperatorKind::Hermitian);
            if r > TOLERANCE {
                return Err(Error::WrongOperatorKind { kind: "hermitian", residual: r });
            }
            eigenprojectors(obs)?;
        }
        Ok(())
    }

    /// Shape of the full network, A, B1, B2, C.
    pub fn shape(&self) -> SystemShape {
        SystemShape::qubits(4).expect("valid")
    }
}

fn observable(m: CMatrix) -> ComplexOperator {
    ComplexOperator::new(m, SystemShape::qubits(1).expect("valid"), OperatorKind::Hermitian)
        .expect("combination of Paulis is hermitian")
}

/// Both sources `phi+`, Bob in the Bell basis, Alice measuring Z, X, Y and
/// Charlie the six normalized sums and differences of pairs of Paulis.
pub fn default_spec() -> ExperimentSpec {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let [x, y, z] = [Pauli::X, Pauli::Y, Pauli::Z].map(pauli_matrix);
    let alice = vec![observable(z.clone()), observable(x.clone()), observable(y.clone())];
    let charlie = vec![
        observable((&x + &z) * h),
        observable((&z - &x) * h),
        observable((&y + &z) * h),
        observable((&z - &y) * h),
        observable((&x + &y) * h),
        observable((&x - &y) * h),
    ];
    ExperimentSpec {
        sources: [bell_state(BellState::PhiPlus), bell_state(BellState::PhiPlus)],
        bob: bell_measurement(),
        alice,
        charlie,
    }
}

/// One cell of the probability grid. `a` and `c` are `+1` or `-1`, `b`
/// indexes [`BOB_OUTCOMES`], `x` and `z` are 1-based settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPoint {
    pub a: i8,
    pub b: usize,
    pub c: i8,
    pub x: usize,
    pub z: usize,
}

const SIGNS: [i8; 2] = [1, -1];

fn sign_index(s: i8) -> Result<usize> {
    match s {
        1 => Ok(0),
        -1 => Ok(1),
        _ => Err(Error::UnknownOutcome(s.to_string())),
    }
}

/// `P(a, b, c | x, z)` over the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    backend: Backend,
    entries: Vec<f64>,
}

impl ProbabilityTable {
    pub const LEN: usize = 4 * 2 * 2 * ALICE_SETTINGS * CHARLIE_SETTINGS;

    fn offset(p: &GridPoint) -> Result<usize> {
        let ai = sign_index(p.a)?;
        let ci = sign_index(p.c)?;
        if p.b >= 4 {
            return Err(Error::IndexOutOfRange { index: p.b, len: 4 });
        }
        if !(1..=ALICE_SETTINGS).contains(&p.x) {
            return Err(Error::IndexOutOfRange { index: p.x, len: ALICE_SETTINGS });
        }
        if !(1..=CHARLIE_SETTINGS).contains(&p.z) {
            return Err(Error::IndexOutOfRange { index: p.z, len: CHARLIE_SETTINGS });
        }
        Ok((((p.b * 2 + ai) * 2 + ci) * ALICE_SETTINGS + p.x - 1) * CHARLIE_SETTINGS + p.z - 1)
    }

    /// Every grid point in storage order.
    pub fn points() -> impl Iterator<Item = GridPoint> {
        (0..4).flat_map(|b| {
            SIGNS.into_iter().flat_map(move |a| {
                SIGNS.into_iter().flat_map(move |c| {
                    (1..=ALICE_SETTINGS)
                        .flat_map(move |x| (1..=CHARLIE_SETTINGS).map(move |z| GridPoint { a, b, c, x, z }))
                })
            })
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn get(&self, p: GridPoint) -> Result<f64> {
        Ok(self.entries[Self::offset(&p)?])
    }

    /// Entries in the order of [`ProbabilityTable::points`].
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `P(b | x, z)`.
    pub fn marginal(&self, b: usize, x: usize, z: usize) -> Result<f64> {
        let mut total = 0.0;
        for a in SIGNS {
            for c in SIGNS {
                total += self.get(GridPoint { a, b, c, x, z })?;
            }
        }
        Ok(total)
    }

    /// Largest `|sum_{a,b,c} P(a,b,c|x,z) - 1|` over the settings.
    pub fn normalization_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 1..=ALICE_SETTINGS {
            for z in 1..=CHARLIE_SETTINGS {
                let total: f64 = (0..4).map(|b| self.marginal(b, x, z).expect("in range")).sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
        worst
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest entrywise difference from another table.
    pub fn max_difference(&self, other: &ProbabilityTable) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }
}

/// Projectors `(1 + A)/2` and `(1 - A)/2`, indexed like [`SIGNS`].
fn sign_projectors(obs: &ComplexOperator) -> Result<[ComplexOperator; 2]> {
    let (plus, minus) = eigenprojectors(obs)?;
    Ok([plus, minus])
}

struct Projectors {
    alice: Vec<[ComplexOperator; 2]>,
    charlie: Vec<[ComplexOperator; 2]>,
}

fn projectors(spec: &ExperimentSpec) -> Result<Projectors> {
    Ok(Projectors {
        alice: spec.alice.iter().map(sign_projectors).collect::<Result<_>>()?,
        charlie: spec.charlie.iter().map(sign_projectors).collect::<Result<_>>()?,
    })
}

fn fill_table<F>(backend: Backend, spec: &ExperimentSpec, mut eval: F) -> Result<ProbabilityTable>
where
    F: FnMut(&ComplexOperator, &ComplexOperator, &ComplexOperator) -> Result<f64>,
{
    spec.validate()?;
    let proj = projectors(spec)?;
    let mut entries = Vec::with_capacity(ProbabilityTable::LEN);
    for p in ProbabilityTable::points() {
        let pa = &proj.alice[p.x - 1][sign_index(p.a)?];
        let pc = &proj.charlie[p.z - 1][sign_index(p.c)?];
        let pb = &spec.bob.projectors()[p.b];
        entries.push(eval(pa, pb, pc)?);
    }
    Ok(ProbabilityTable { backend, entries })
}

/// The network state `source_AB1 (x) source_B2C` in real form.
pub fn real_network_state(spec: &ExperimentSpec) -> Result<RealState> {
    flag_tensor_states(&s_map(&spec.sources[0]), &s_map(&spec.sources[1]))
}

fn real_joint(pa: &ComplexOperator, pb: &ComplexOperator, pc: &ComplexOperator) -> Result<RealOperator> {
    flag_tensor_ops(&flag_tensor_ops(&t_map(pa), &t_map(pb))?, &t_map(pc))
}

/// Evaluates the full grid with the chosen formalism.
pub fn probability_table(spec: &ExperimentSpec, backend: Backend) -> Result<ProbabilityTable> {
    match backend {
        Backend::Complex => {
            let psi = spec.sources[0].tensor(&spec.sources[1])?;
            fill_table(backend, spec, |pa, pb, pc| {
                let joint = pa.tensor(pb)?.tensor(pc)?.with_kind(OperatorKind::Projector)?;
                born_probability(&psi, &joint)
            })
        }
        Backend::Real => {
            let v = real_network_state(spec)?;
            fill_table(backend, spec, |pa, pb, pc| real_born(&v, &real_joint(pa, pb, pc)?))
        }
        Backend::RealExpanded => {
            let v = real_network_state(spec)?.to_expanded();
            fill_table(backend, spec, |pa, pb, pc| {
                let m = real_joint(pa, pb, pc)?.expanded();
                Ok(v.dot(&m.dot(&v)).clamp(0.0, 1.0))
            })
        }
    }
}

/// `sum_{a,c} a c P(a,b,c|x,z)` and the same divided by `P(b|x,z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SValue {
    pub b: usize,
    pub x: usize,
    pub z: usize,
    pub raw: f64,
    pub conditional: f64,
}

pub fn s_value(table: &ProbabilityTable, b: usize, x: usize, z: usize) -> Result<SValue> {
    let mut raw = 0.0;
    for a in SIGNS {
        for c in SIGNS {
            raw += f64::from(a * c) * table.get(GridPoint { a, b, c, x, z })?;
        }
    }
    let pb = table.marginal(b, x, z)?;
    if pb < ZERO_PROBABILITY {
        return Err(Error::ZeroProbability(pb));
    }
    Ok(SValue { b, x, z, raw, conditional: raw / pb })
}

/// Everything derived from one probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct BellReport {
    pub backend: Backend,
    /// All `4 * 3 * 6` S-values, b-major then x then z.
    pub s_values: Vec<SValue>,
    /// `P(b)`, averaged over the settings.
    pub outcome_probability: [f64; 4],
    /// `T_b`, built from conditional S-values.
    pub per_outcome: [f64; 4],
    /// `sum_b P(b) T_b`.
    pub total: f64,
    pub quantum_value: f64,
    pub real_tensor_bound: f64,
}

impl BellReport {
    pub fn s(&self, b: usize, x: usize, z: usize) -> Option<&SValue> {
        self.s_values.iter().find(|s| s.b == b && s.x == x && s.z == z)
    }
}

/// Three CHSH expressions per Bob outcome, with outcome-dependent signs.
///
/// Terms with Alice's Z flip with `b2`, terms with her X flip with `b1` and
/// terms with her Y flip with `b1 + b2`, tracking which Bell state Alice and
/// Charlie share after the swap.
pub fn bell_functional(table: &ProbabilityTable) -> Result<BellReport> {
    let mut s_values = Vec::with_capacity(4 * ALICE_SETTINGS * CHARLIE_SETTINGS);
    for b in 0..4 {
        for x in 1..=ALICE_SETTINGS {
            for z in 1..=CHARLIE_SETTINGS {
                s_values.push(s_value(table, b, x, z)?);
            }
        }
    }
    let settings = (ALICE_SETTINGS * CHARLIE_SETTINGS) as f64;
    let mut outcome_probability = [0.0; 4];
    let mut per_outcome = [0.0; 4];
    for b in 0..4 {
        let mut pb = 0.0;
        for x in 1..=ALICE_SETTINGS {
            for z in 1..=CHARLIE_SETTINGS {
                pb += table.marginal(b, x, z)?;
            }
        }
        outcome_probability[b] = pb / settings;

        let s = |x: usize, z: usize| s_values[(b * ALICE_SETTINGS + x - 1) * CHARLIE_SETTINGS + z - 1].conditional;
        let sb1 = if b >> 1 == 0 { 1.0 } else { -1.0 };
        let sb2 = if b & 1 == 0 { 1.0 } else { -1.0 };
        per_outcome[b] = sb2 * (s(1, 1) + s(1, 2)) + sb1 * (s(2, 1) - s(2, 2)) + sb2 * (s(1, 3) + s(1, 4))
            - sb1 * sb2 * (s(3, 3) - s(3, 4))
            + sb1 * (s(2, 5) + s(2, 6))
            - sb1 * sb2 * (s(3, 5) - s(3, 6));
    }
    let total = outcome_probability.iter().zip(&per_outcome).map(|(p, t)| p * t).sum();
    Ok(BellReport {
        backend: table.backend,
        s_values,
        outcome_probability,
        per_outcome,
        total,
        quantum_value: QUANTUM_VALUE,
        real_tensor_bound: REAL_TENSOR_BOUND,
    })
}

/// Alice-Charlie state in real form after Bob obtains outcome `b`.
///
/// Bob's projector is applied to the compact network state, then B1, B2 and
/// their flags are traced out of the expanded rank-one projector.
pub fn post_measurement_marginal(spec: &ExperimentSpec, b: usize) -> Result<RealDensity> {
    spec.validate()?;
    if b >= 4 {
        return Err(Error::IndexOutOfRange { index: b, len: 4 });
    }
    let q1 = SystemShape::qubits(1)?;
    let id = t_map(&ComplexOperator::identity(q1.clone()));
    let bob = flag_tensor_ops(&flag_tensor_ops(&id, &t_map(&spec.bob.projectors()[b]))?, &id)?;
    let (_, post) = real_collapse(&real_network_state(spec)?, &bob)?;
    reduced_pure_state(&post, &[0, 3])
}

/// `|phi+><phi+|_AC (x) (|phi-><phi-| + |psi+><psi+|)/2` on A, C, A', C',
/// written out directly from the Bell vectors.
pub fn swapped_state_reference() -> RMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phi_plus: RVector = array![h, 0.0, 0.0, h];
    let phi_minus: RVector = array![h, 0.0, 0.0, -h];
    let psi_plus: RVector = array![0.0, h, h, 0.0];
    let flags = (outer(&phi_minus, &phi_minus) + outer(&psi_plus, &psi_plus)) * 0.5;
    kron(&outer(&phi_plus, &phi_plus), &flags)
}
