//! Standard complex quantum mechanics on dense matrices.
//!
//! This is the oracle every real-valued computation is compared against, so
//! it stays deliberately naive: full matrices, no structure exploitation.

use std::fmt;
use std::str::FromStr;

use ndarray::{array, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{dagger, kron, kron_vec, max_abs, max_abs_diff, trace, CMatrix, CVector, SystemShape, TOLERANCE};

/// Probabilities below this are treated as impossible outcomes.
pub const ZERO_PROBABILITY: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A pure state vector over a multipartite shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexState {
    amplitudes: CVector,
    shape: SystemShape,
}

impl ComplexState {
    /// Normalized state; fails when `<psi|psi>` differs from 1.
    pub fn new(amplitudes: CVector, shape: SystemShape) -> Result<Self> {
        let s = Self::from_vector(amplitudes, shape)?;
        let n = s.norm_sqr();
        if (n - 1.0).abs() > TOLERANCE {
            return Err(Error::NotNormalized(n));
        }
        Ok(s)
    }

    /// Any vector of the right length, normalized or not.
    pub fn from_vector(amplitudes: CVector, shape: SystemShape) -> Result<Self> {
        if amplitudes.len() != shape.main_dim() {
            return Err(Error::DimensionMismatch { expected: shape.main_dim(), actual: amplitudes.len() });
        }
        Ok(Self { amplitudes, shape })
    }

    /// Computational basis state `|index>`.
    pub fn basis(shape: SystemShape, index: usize) -> Result<Self> {
        let d = shape.main_dim();
        if index >= d {
            return Err(Error::IndexOutOfRange { index, len: d });
        }
        let mut v = CVector::zeros(d);
        v[index] = ONE;
        Ok(Self { amplitudes: v, shape })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n < ZERO_PROBABILITY {
            return Err(Error::NotNormalized(0.0));
        }
        Ok(Self { amplitudes: self.amplitudes.mapv(|z| z / n), shape: self.shape.clone() })
    }

    /// `|self> (x) |other>`.
    pub fn tensor(&self, other: &ComplexState) -> Result<Self> {
        Ok(Self {
            amplitudes: kron_vec(&self.amplitudes, &other.amplitudes),
            shape: self.shape.concat(&other.shape)?,
        })
    }

    /// Multiply by a scalar, typically a phase `e^{i alpha}`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { amplitudes: self.amplitudes.mapv(|z| z * factor), shape: self.shape.clone() }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &ComplexState) -> Result<Complex64> {
        if self.shape != other.shape {
            return Err(Error::InvalidShape(format!("{} vs {}", self.shape, other.shape)));
        }
        Ok(self.amplitudes.iter().zip(other.amplitudes.iter()).map(|(a, b)| a.conj() * b).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    General,
    Hermitian,
    Projector,
    Unitary,
    Density,
}

impl OperatorKind {
    fn name(self) -> &'static str {
        match self {
            OperatorKind::General => "general",
            OperatorKind::Hermitian => "hermitian",
            OperatorKind::Projector => "a projector",
            OperatorKind::Unitary => "unitary",
            OperatorKind::Density => "a density operator",
        }
    }
}

/// A square operator over a multipartite shape, tagged with the property it
/// was validated to have.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexOperator {
    matrix: CMatrix,
    shape: SystemShape,
    kind: OperatorKind,
}

impl ComplexOperator {
    /// Validates `matrix` against `kind` at [`TOLERANCE`].
    pub fn new(matrix: CMatrix, shape: SystemShape, kind: OperatorKind) -> Result<Self> {
        let d = shape.main_dim();
        if matrix.dim() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, actual: matrix.nrows() });
        }
        let op = Self { matrix, shape, kind };
        let residual = op.kind_residual(kind);
        if residual > TOLERANCE {
            return Err(Error::WrongOperatorKind { kind: kind.name(), residual });
        }
        Ok(op)
    }

    pub fn general(matrix: CMatrix, shape: SystemShape) -> Result<Self> {
        Self::new(matrix, shape, OperatorKind::General)
    }

    pub fn identity(shape: SystemShape) -> Self {
        let d = shape.main_dim();
        Self { matrix: CMatrix::eye(d), shape, kind: OperatorKind::Projector }
    }

    /// `|psi><psi|` for a normalized state.
    pub fn projector_onto(state: &ComplexState) -> Result<Self> {
        let v = state.amplitudes();
        let m = Array2::from_shape_fn((v.len(), v.len()), |(i, j)| v[i] * v[j].conj());
        Self::new(m, state.shape().clone(), OperatorKind::Projector)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// Re-tag after checking the new property.
    pub fn with_kind(self, kind: OperatorKind) -> Result<Self> {
        Self::new(self.matrix, self.shape, kind)
    }

    /// Largest entrywise deviation from the defining identity of `kind`.
    pub fn kind_residual(&self, kind: OperatorKind) -> f64 {
        let m = &self.matrix;
        let herm = max_abs_diff(m, &dagger(m));
        match kind {
            OperatorKind::General => 0.0,
            OperatorKind::Hermitian => herm,
            OperatorKind::Projector => herm.max(max_abs_diff(&m.dot(m), m)),
            OperatorKind::Unitary => max_abs_diff(&m.dot(&dagger(m)), &CMatrix::eye(m.nrows())),
            OperatorKind::Density => {
                let tr = (trace(m) - ONE).norm();
                herm.max(tr).max(psd_violation(m))
            }
        }
    }

    /// `self (x) other`; the result is tagged general unless both factors
    /// share a kind preserved by tensor products.
    pub fn tensor(&self, other: &ComplexOperator) -> Result<Self> {
        let kind = if self.kind == other.kind { self.kind } else { OperatorKind::General };
        Ok(Self {
            matrix: kron(&self.matrix, &other.matrix),
            shape: self.shape.concat(&other.shape)?,
            kind,
        })
    }

    /// Operator product `self * other`, tagged general.
    pub fn compose(&self, other: &ComplexOperator) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::InvalidShape(format!("{} vs {}", self.shape, other.shape)));
        }
        Ok(Self { matrix: self.matrix.dot(&other.matrix), shape: self.shape.clone(), kind: OperatorKind::General })
    }

    pub fn apply(&self, state: &ComplexState) -> Result<ComplexState> {
        if self.shape != *state.shape() {
            return Err(Error::InvalidShape(format!("{} vs {}", self.shape, state.shape())));
        }
        ComplexState::from_vector(self.matrix.dot(state.amplitudes()), self.shape.clone())
    }

    /// `1 (x) .. (x) self (x) .. (x) 1` with `self` at subsystem `index` of
    /// `total`.
    pub fn embed(&self, total: &SystemShape, index: usize) -> Result<Self> {
        if index >= total.parties() {
            return Err(Error::IndexOutOfRange { index, len: total.parties() });
        }
        let dims = total.dims();
        let before: usize = dims[..index].iter().product();
        let after: usize = dims[index + 1..].iter().product();
        let own = self.shape.main_dim();
        if own != dims[index] || self.shape.parties() != 1 {
            return Err(Error::DimensionMismatch { expected: dims[index], actual: own });
        }
        let m = kron(&kron(&CMatrix::eye(before), &self.matrix), &CMatrix::eye(after));
        Ok(Self { matrix: m, shape: total.clone(), kind: self.kind })
    }
}

/// How far a Hermitian matrix is from positive semidefinite, measured as the
/// most negative pivot met by a diagonally pivoted Cholesky factorization.
fn psd_violation(m: &CMatrix) -> f64 {
    let mut a = m.clone();
    let n = a.nrows();
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        let (pos, &p) = active
            .iter()
            .enumerate()
            .max_by(|x, y| a[(*x.1, *x.1)].re.total_cmp(&a[(*y.1, *y.1)].re))
            .expect("non-empty");
        let pivot = a[(p, p)].re;
        if pivot <= TOLERANCE {
            // the remaining Schur complement must vanish
            let rest = active
                .iter()
                .flat_map(|&i| active.iter().map(move |&j| (i, j)))
                .map(|(i, j)| a[(i, j)].norm())
                .fold(0.0, f64::max);
            return if pivot < -TOLERANCE { -pivot } else if rest > 10.0 * TOLERANCE.sqrt() { rest } else { 0.0 };
        }
        active.remove(pos);
        for &i in &active {
            let f = a[(i, p)] / pivot;
            for &j in &active {
                let delta = f * a[(p, j)];
                a[(i, j)] -= delta;
            }
        }
    }
    0.0
}

/// A complete set of orthogonal projectors with outcome labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    projectors: Vec<ComplexOperator>,
    labels: Vec<String>,
}

impl MeasurementEnsemble {
    pub fn new(projectors: Vec<ComplexOperator>, labels: Vec<String>) -> Result<Self> {
        if projectors.is_empty() || projectors.len() != labels.len() {
            return Err(Error::InvalidEnsemble("need one label per projector".into()));
        }
        let shape = projectors[0].shape().clone();
        let d = shape.main_dim();
        let mut sum = CMatrix::zeros((d, d));
        for (k, p) in projectors.iter().enumerate() {
            if *p.shape() != shape {
                return Err(Error::InvalidEnsemble(format!("projector {k} has shape {}", p.shape())));
            }
            let r = p.kind_residual(OperatorKind::Projector);
            if r > TOLERANCE {
                return Err(Error::InvalidEnsemble(format!("element {k} is not a projector (residual {r:e})")));
            }
            sum = sum + p.matrix();
        }
        let completeness = max_abs_diff(&sum, &CMatrix::eye(d));
        if completeness > TOLERANCE {
            return Err(Error::InvalidEnsemble(format!("projectors do not sum to identity (residual {completeness:e})")));
        }
        for r in 0..projectors.len() {
            for s in r + 1..projectors.len() {
                let overlap = max_abs(&projectors[r].matrix().dot(projectors[s].matrix()));
                if overlap > TOLERANCE {
                    return Err(Error::InvalidEnsemble(format!("elements {r} and {s} are not orthogonal")));
                }
            }
        }
        Ok(Self { projectors, labels })
    }

    /// Eigenprojectors `(1 + A)/2` and `(1 - A)/2` of an observable with
    /// eigenvalues +-1, labelled "+1" and "-1".
    pub fn from_involution(observable: &ComplexOperator) -> Result<Self> {
        let (plus, minus) = eigenprojectors(observable)?;
        Self::new(vec![plus, minus], vec!["+1".into(), "-1".into()])
    }

    pub fn projectors(&self) -> &[ComplexOperator] {
        &self.projectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn shape(&self) -> &SystemShape {
        self.projectors[0].shape()
    }

    pub fn projector(&self, label: &str) -> Result<&ComplexOperator> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| &self.projectors[k])
            .ok_or_else(|| Error::UnknownOutcome(label.to_string()))
    }
}

/// `((1 + A)/2, (1 - A)/2)` for a Hermitian involution `A`.
pub fn eigenprojectors(observable: &ComplexOperator) -> Result<(ComplexOperator, ComplexOperator)> {
    let a = observable.matrix();
    let sq = max_abs_diff(&a.dot(a), &CMatrix::eye(a.nrows()));
    if sq > TOLERANCE {
        return Err(Error::WrongOperatorKind { kind: "an involution", residual: sq });
    }
    let id = CMatrix::eye(a.nrows());
    let half = Complex64::new(0.5, 0.0);
    let shape = observable.shape().clone();
    Ok((
        ComplexOperator::new((&id + a) * half, shape.clone(), OperatorKind::Projector)?,
        ComplexOperator::new((&id - a) * half, shape, OperatorKind::Projector)?,
    ))
}

fn require_shape(op: &ComplexOperator, state: &ComplexState) -> Result<()> {
    if op.shape() != state.shape() {
        return Err(Error::InvalidShape(format!("operator {} vs state {}", op.shape(), state.shape())));
    }
    Ok(())
}

fn sandwich(state: &ComplexState, op: &CMatrix) -> Complex64 {
    let v = state.amplitudes();
    v.iter().zip(op.dot(v).iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Born rule `<psi|Pi|psi>`, clamped to `[0, 1]`.
pub fn born_probability(state: &ComplexState, proj: &ComplexOperator) -> Result<f64> {
    require_shape(proj, state)?;
    let r = proj.kind_residual(OperatorKind::Projector);
    if r > TOLERANCE {
        return Err(Error::WrongOperatorKind { kind: "a projector", residual: r });
    }
    Ok(sandwich(state, proj.matrix()).re.clamp(0.0, 1.0))
}

/// `<psi|A|psi>` for Hermitian `A`.
pub fn expectation(state: &ComplexState, obs: &ComplexOperator) -> Result<f64> {
    require_shape(obs, state)?;
    let r = obs.kind_residual(OperatorKind::Hermitian);
    if r > TOLERANCE {
        return Err(Error::WrongOperatorKind { kind: "hermitian", residual: r });
    }
    let value = sandwich(state, obs.matrix());
    debug_assert!(value.im.abs() <= TOLERANCE * (1.0 + state.norm_sqr()));
    Ok(value.re)
}

/// Projective measurement conditioned on `outcome`: returns the outcome
/// probability and the renormalized post-measurement state.
pub fn measure_and_collapse(
    state: &ComplexState,
    ensemble: &MeasurementEnsemble,
    outcome: &str,
) -> Result<(f64, ComplexState)> {
    let proj = ensemble.projector(outcome)?;
    require_shape(proj, state)?;
    let projected = proj.apply(state)?;
    let p = projected.norm_sqr();
    if p < ZERO_PROBABILITY {
        return Err(Error::ZeroProbability(p));
    }
    Ok((p, projected.normalized()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl FromStr for Pauli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(Pauli::I),
            "X" => Ok(Pauli::X),
            "Y" => Ok(Pauli::Y),
            "Z" => Ok(Pauli::Z),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

pub fn pauli_matrix(p: Pauli) -> CMatrix {
    match p {
        Pauli::I => array![[ONE, ZERO], [ZERO, ONE]],
        Pauli::X => array![[ZERO, ONE], [ONE, ZERO]],
        Pauli::Y => array![[ZERO, -I], [I, ZERO]],
        Pauli::Z => array![[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// Single-qubit Pauli operator, tagged Hermitian.
pub fn pauli(p: Pauli) -> ComplexOperator {
    ComplexOperator {
        matrix: pauli_matrix(p),
        shape: SystemShape::qubits(1).expect("valid"),
        kind: OperatorKind::Hermitian,
    }
}

/// The four two-qubit Bell states.
///
/// `PsiMinus` follows the sign convention `(|10> - |01>)/sqrt 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl FromStr for BellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi+" | "φ+" | "φ⁺" => Ok(BellState::PhiPlus),
            "phi-" | "φ-" | "φ⁻" => Ok(BellState::PhiMinus),
            "psi+" | "ψ+" | "ψ⁺" => Ok(BellState::PsiPlus),
            "psi-" | "ψ-" | "ψ⁻" => Ok(BellState::PsiMinus),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BellState::PhiPlus => "phi+",
            BellState::PhiMinus => "phi-",
            BellState::PsiPlus => "psi+",
            BellState::PsiMinus => "psi-",
        };
        f.write_str(s)
    }
}

pub fn bell_state(which: BellState) -> ComplexState {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let amps = match which {
        BellState::PhiPlus => array![h, ZERO, ZERO, h],
        BellState::PhiMinus => array![h, ZERO, ZERO, -h],
        BellState::PsiPlus => array![ZERO, h, h, ZERO],
        BellState::PsiMinus => array![ZERO, -h, h, ZERO],
    };
    ComplexState { amplitudes: amps, shape: SystemShape::qubits(2).expect("valid") }
}

/// Measurement in the Bell basis, outcomes labelled "00", "01", "10", "11"
/// for `phi+`, `psi+`, `phi-`, `psi-` respectively.
pub fn bell_measurement() -> MeasurementEnsemble {
    let order = [BellState::PhiPlus, BellState::PsiPlus, BellState::PhiMinus, BellState::PsiMinus];
    let projectors = order
        .iter()
        .map(|&b| ComplexOperator::projector_onto(&bell_state(b)).expect("Bell states are normalized"))
        .collect();
    let labels = ["00", "01", "10", "11"].iter().map(|s| s.to_string()).collect();
    MeasurementEnsemble::new(projectors, labels).expect("Bell basis is complete")
}
