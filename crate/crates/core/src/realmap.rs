//! Maps between the complex and the real formalism.
//!
//! A real composite state lives in `(R^d1 (x) .. (x) R^dN) (x) (R^2)^N`
//! modulo the kernel of the tensored inverse flag map. Every class has a
//! canonical representative of the form `re (x) psi_even + im (x) psi_odd`,
//! so states and operators are stored compactly as `(re, im)` pairs. The
//! expanded vectors are in grouped factor order: all main factors first, then
//! one flag per party.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use ndarray::{array, ArrayView2};

use crate::complexqm::{ComplexOperator, ComplexState, OperatorKind};
use crate::error::{Error, Result};
use crate::tensor::{
    join_complex, join_complex_vec, kron, kron_all, kron_vec, max_abs, max_abs_diff, outer, permute_matrix,
    permute_vector,
    split_complex, CMatrix, RMatrix, RVector, SystemShape, MAX_PARTIES, TOLERANCE,
};

/// Canonical flag vectors and the flag operators they induce for `N` parties.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagBasis {
    parties: usize,
    even: RVector,
    odd: RVector,
    identity: RMatrix,
    unit: RMatrix,
}

impl FlagBasis {
    fn build(n: usize) -> Self {
        let dim = 1usize << n;
        let norm = 1.0 / ((1usize << (n - 1)) as f64).sqrt();
        let mut even = RVector::zeros(dim);
        let mut odd = RVector::zeros(dim);
        for k in 0..dim {
            let w = k.count_ones() as usize;
            if w % 2 == 0 {
                even[k] = if (w / 2) % 2 == 0 { norm } else { -norm };
            } else {
                odd[k] = if ((w - 1) / 2) % 2 == 0 { norm } else { -norm };
            }
        }
        let identity = outer(&even, &even) + outer(&odd, &odd);
        let unit = outer(&odd, &even) - outer(&even, &odd);
        Self { parties: n, even, odd, identity, unit }
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    /// `psi_even^(N)`: even Hamming weight, signs `(-1)^(|k|/2)`.
    pub fn even(&self) -> &RVector {
        &self.even
    }

    /// `psi_odd^(N)`: odd Hamming weight, signs `(-1)^((|k|-1)/2)`.
    pub fn odd(&self) -> &RVector {
        &self.odd
    }

    /// `I^(N) = |even><even| + |odd><odd|`.
    pub fn identity(&self) -> &RMatrix {
        &self.identity
    }

    /// `J^(N) = |odd><even| - |even><odd|`, the imaginary unit on the
    /// canonical flag plane.
    pub fn unit(&self) -> &RMatrix {
        &self.unit
    }
}

static FLAG_CACHE: OnceLock<RwLock<HashMap<usize, Arc<FlagBasis>>>> = OnceLock::new();

/// Flag basis for `n` parties. Built once per `n` and shared.
pub fn flag_basis(n: usize) -> Result<Arc<FlagBasis>> {
    if n == 0 {
        return Err(Error::TooFewParties { min: 1, actual: 0 });
    }
    if n > MAX_PARTIES {
        return Err(Error::UnsupportedPartyCount(n));
    }
    let cache = FLAG_CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(b) = cache.read().expect("flag cache poisoned").get(&n) {
        return Ok(Arc::clone(b));
    }
    let built = Arc::new(FlagBasis::build(n));
    let mut w = cache.write().expect("flag cache poisoned");
    Ok(Arc::clone(w.entry(n).or_insert(built)))
}

/// A real state in compact form, `re (x) psi_even + im (x) psi_odd`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealState {
    re: RVector,
    im: RVector,
    shape: SystemShape,
}

impl RealState {
    pub fn new(re: RVector, im: RVector, shape: SystemShape) -> Result<Self> {
        let d = shape.main_dim();
        for part in [&re, &im] {
            if part.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: part.len() });
            }
        }
        Ok(Self { re, im, shape })
    }

    pub fn re(&self) -> &RVector {
        &self.re
    }

    pub fn im(&self) -> &RVector {
        &self.im
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    /// `|re|^2 + |im|^2`, equal to the squared norm of the expanded vector.
    pub fn norm_sqr(&self) -> f64 {
        self.re.dot(&self.re) + self.im.dot(&self.im)
    }

    /// Canonical representative in the expanded space, grouped order.
    pub fn to_expanded(&self) -> RVector {
        let basis = flag_basis(self.shape.parties()).expect("shape bounds party count");
        kron_vec(&self.re, basis.even()) + kron_vec(&self.im, basis.odd())
    }

    /// Reads a state off its canonical representative, a vector of the form
    /// `re (x) psi_even + im (x) psi_odd`. Unlike [`canonicalize`] this does not
    /// rescale, and it fails for vectors with a kernel component.
    pub fn from_canonical(v: &RVector, shape: &SystemShape) -> Result<Self> {
        let (re, im) = flag_components(v, shape)?;
        let state = RealState::new(re, im, shape.clone())?;
        let residual = max_abs_diff(&state.to_expanded(), v);
        if residual > TOLERANCE {
            return Err(Error::NotInImage(residual));
        }
        Ok(state)
    }

    /// Single-flag form `re (x) |0> + im (x) |1>` of dimension `2D`.
    pub fn single_flag(&self) -> RVector {
        let d = self.re.len();
        RVector::from_shape_fn(2 * d, |k| if k % 2 == 0 { self.re[k / 2] } else { self.im[k / 2] })
    }

    /// Largest deviation between two compact states.
    pub fn distance(&self, other: &RealState) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        max_abs_diff(&self.re, &other.re).max(max_abs_diff(&self.im, &other.im))
    }
}

/// A real operator in compact form, `re (x) I^(N) + im (x) J^(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealOperator {
    re: RMatrix,
    im: RMatrix,
    shape: SystemShape,
}

impl RealOperator {
    pub fn new(re: RMatrix, im: RMatrix, shape: SystemShape) -> Result<Self> {
        let d = shape.main_dim();
        for part in [&re, &im] {
            if part.dim() != (d, d) {
                return Err(Error::DimensionMismatch { expected: d, actual: part.nrows() });
            }
        }
        Ok(Self { re, im, shape })
    }

    pub fn identity(shape: SystemShape) -> Self {
        let d = shape.main_dim();
        Self { re: RMatrix::eye(d), im: RMatrix::zeros((d, d)), shape }
    }

    pub fn re(&self) -> &RMatrix {
        &self.re
    }

    pub fn im(&self) -> &RMatrix {
        &self.im
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    /// Full matrix on the expanded space, grouped order.
    pub fn expanded(&self) -> RMatrix {
        let basis = flag_basis(self.shape.parties()).expect("shape bounds party count");
        kron(&self.re, basis.identity()) + kron(&self.im, basis.unit())
    }

    /// Operator product `self * other` in compact form.
    pub fn compose(&self, other: &RealOperator) -> Result<RealOperator> {
        same_shape(&self.shape, &other.shape)?;
        Ok(Self {
            re: self.re.dot(&other.re) - self.im.dot(&other.im),
            im: self.re.dot(&other.im) + self.im.dot(&other.re),
            shape: self.shape.clone(),
        })
    }

    /// Transpose of the expanded operator, `re^T (x) I - im^T (x) J`.
    pub fn transpose(&self) -> RealOperator {
        Self { re: self.re.t().to_owned(), im: -self.im.t().to_owned(), shape: self.shape.clone() }
    }

    /// How far the expanded operator is from symmetric.
    pub fn symmetry_residual(&self) -> f64 {
        let t = self.transpose();
        max_abs_diff(&self.re, &t.re).max(max_abs_diff(&self.im, &t.im))
    }

    pub fn distance(&self, other: &RealOperator) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        max_abs_diff(&self.re, &other.re).max(max_abs_diff(&self.im, &other.im))
    }

    /// `re + i im`, the operator this one represents.
    pub fn to_complex(&self) -> CMatrix {
        join_complex(&self.re, &self.im)
    }
}

fn same_shape(a: &SystemShape, b: &SystemShape) -> Result<()> {
    if a != b {
        return Err(Error::InvalidShape(format!("{a} vs {b}")));
    }
    Ok(())
}

/// Complex state to compact real state: `Re(psi) (x) |0>_F + Im(psi) (x) |1>_F`.
pub fn s_map(psi: &ComplexState) -> RealState {
    let a = psi.amplitudes();
    RealState { re: a.mapv(|z| z.re), im: a.mapv(|z| z.im), shape: psi.shape().clone() }
}

/// Inverse of [`s_map`]: `re + i im`.
pub fn s_inv(state: &RealState) -> ComplexState {
    ComplexState::from_vector(join_complex_vec(&state.re, &state.im), state.shape.clone())
        .expect("compact parts match the shape")
}

/// Flag rotation `R_F(alpha)`, the real image of the global phase `e^{i alpha}`.
pub fn flag_rotation(alpha: f64) -> RMatrix {
    let (s, c) = alpha.sin_cos();
    array![[c, -s], [s, c]]
}

/// Complex operator to real operator: `Re(A) (x) I + Im(A) (x) J`.
pub fn t_map(a: &ComplexOperator) -> RealOperator {
    let (re, im) = split_complex(a.matrix());
    RealOperator { re, im, shape: a.shape().clone() }
}

/// Left inverse of [`t_map`] on expanded matrices.
///
/// Contracts the flags with `psi_even + i psi_odd` on the left and its
/// conjugate on the right, with a factor 1/2. Fails when the input is not the
/// image of a complex operator.
pub fn t_inv_left(expanded: &RMatrix, shape: &SystemShape) -> Result<ComplexOperator> {
    let n = shape.expanded_dim();
    if expanded.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, actual: expanded.nrows() });
    }
    let basis = flag_basis(shape.parties())?;
    let d = shape.main_dim();
    let e = contraction(d, basis.even());
    let o = contraction(d, basis.odd());
    let m_et = expanded.dot(&e.t());
    let m_ot = expanded.dot(&o.t());
    let re = (e.dot(&m_et) + o.dot(&m_ot)) * 0.5;
    let im = (o.dot(&m_et) - e.dot(&m_ot)) * 0.5;
    let candidate = RealOperator { re, im, shape: shape.clone() };
    let residual = max_abs_diff(&candidate.expanded(), expanded);
    if residual > TOLERANCE {
        return Err(Error::NotInImage(residual));
    }
    ComplexOperator::general(candidate.to_complex(), shape.clone())
}

/// `1_D (x) <flag|` as a `D x D 2^N` matrix.
fn contraction(d: usize, flag: &RVector) -> RMatrix {
    kron(&RMatrix::eye(d), &flag.view().insert_axis(ndarray::Axis(0)).to_owned())
}

/// Checks the recursive structure of the flag basis for `N + M` parties
/// against the `N`- and `M`-party bases, returning the largest residual.
pub fn compose_flag_basis_check(n: usize, m: usize) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::TooFewParties { min: 1, actual: 0 });
    }
    let a = flag_basis(n)?;
    let b = flag_basis(m)?;
    let ab = flag_basis(n + m)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;

    let even = (kron_vec(a.even(), b.even()) - kron_vec(a.odd(), b.odd())) * h;
    let odd = (kron_vec(a.even(), b.odd()) + kron_vec(a.odd(), b.even())) * h;
    let id = (kron(a.identity(), b.identity()) - kron(a.unit(), b.unit())) * 0.5;
    let unit = (kron(a.identity(), b.unit()) + kron(a.unit(), b.identity())) * 0.5;

    let residual = max_abs_diff(ab.even(), &even)
        .max(max_abs_diff(ab.odd(), &odd))
        .max(max_abs_diff(ab.identity(), &id))
        .max(max_abs_diff(ab.unit(), &unit));
    if residual > TOLERANCE {
        return Err(Error::Violation { check: format!("flag basis composition ({n},{m})"), residual });
    }
    Ok(residual)
}

/// Projector onto the orthogonal complement of the quotient kernel,
/// `1_D (x) I^(N)`, in grouped order.
pub fn kernel_projector(shape: &SystemShape) -> Result<RMatrix> {
    if shape.parties() < 2 {
        return Err(Error::TooFewParties { min: 2, actual: shape.parties() });
    }
    let basis = flag_basis(shape.parties())?;
    Ok(kron(&RMatrix::eye(shape.main_dim()), basis.identity()))
}

/// View an expanded vector as a `D x 2^N` matrix (row = main index).
fn as_main_by_flag<'a>(v: &'a RVector, shape: &SystemShape) -> Result<ArrayView2<'a, f64>> {
    let n = shape.expanded_dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: v.len() });
    }
    Ok(v.view().into_shape_with_order((shape.main_dim(), shape.flag_dim())).expect("contiguous"))
}

/// Flag-space coefficients `(<even|v>, <odd|v>)` per main index.
fn flag_components(v: &RVector, shape: &SystemShape) -> Result<(RVector, RVector)> {
    let basis = flag_basis(shape.parties())?;
    let m = as_main_by_flag(v, shape)?;
    Ok((m.dot(basis.even()), m.dot(basis.odd())))
}

/// `P_perp v` without rescaling.
pub fn project_canonical(v: &RVector, shape: &SystemShape) -> Result<RVector> {
    let (re, im) = flag_components(v, shape)?;
    let basis = flag_basis(shape.parties())?;
    Ok(kron_vec(&re, basis.even()) + kron_vec(&im, basis.odd()))
}

/// Canonical compact form of the class of an expanded vector.
///
/// The flag coefficients are scaled by `sqrt(2^(N-1))`, which sends
/// `x (x) |0..0>_F` to `x (x) psi_even` exactly. The result is the compact
/// form of `(S^-1)^(x)N v`, so inputs are expected to be products of
/// single-flag vectors or sums of such; a vector that is already canonical
/// comes back scaled by `sqrt(2^(N-1))` (use [`RealState::from_canonical`]).
pub fn canonicalize(v: &RVector, shape: &SystemShape) -> Result<RealState> {
    let (re, im) = flag_components(v, shape)?;
    if max_abs(&re).max(max_abs(&im)) < TOLERANCE {
        return Err(Error::KernelVector);
    }
    let scale = ((1usize << (shape.parties() - 1)) as f64).sqrt();
    RealState::new(re * scale, im * scale, shape.clone())
}

/// Whether two expanded vectors belong to the same class.
pub fn equivalent(u: &RVector, v: &RVector, shape: &SystemShape) -> Result<bool> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), actual: v.len() });
    }
    let diff = project_canonical(&(u - v), shape)?;
    Ok(diff.dot(&diff).sqrt() < TOLERANCE)
}

/// Tensor product of two expanded vectors, regrouped so that all mains come
/// before all flags.
pub fn expanded_tensor(u: &RVector, su: &SystemShape, v: &RVector, sv: &SystemShape) -> Result<RVector> {
    for (x, s) in [(u, su), (v, sv)] {
        if x.len() != s.expanded_dim() {
            return Err(Error::DimensionMismatch { expected: s.expanded_dim(), actual: x.len() });
        }
    }
    let (nu, nv) = (su.parties(), sv.parties());
    let dims: Vec<usize> = su.grouped_factors().into_iter().chain(sv.grouped_factors()).collect();
    let main_u = 0..nu;
    let main_v = 2 * nu..2 * nu + nv;
    let flag_u = nu..2 * nu;
    let flag_v = 2 * nu + nv..2 * (nu + nv);
    let perm: Vec<usize> = main_u.chain(main_v).chain(flag_u).chain(flag_v).collect();
    permute_vector(&kron_vec(u, v), &dims, &perm)
}

/// Flag tensor product of compact states.
pub fn flag_tensor_states(a: &RealState, b: &RealState) -> Result<RealState> {
    let shape = a.shape.concat(&b.shape)?;
    Ok(RealState {
        re: kron_vec(&a.re, &b.re) - kron_vec(&a.im, &b.im),
        im: kron_vec(&a.re, &b.im) + kron_vec(&a.im, &b.re),
        shape,
    })
}

/// Flag tensor product of compact operators.
pub fn flag_tensor_ops(a: &RealOperator, b: &RealOperator) -> Result<RealOperator> {
    let shape = a.shape.concat(&b.shape)?;
    Ok(RealOperator {
        re: kron(&a.re, &b.re) - kron(&a.im, &b.im),
        im: kron(&a.re, &b.im) + kron(&a.im, &b.re),
        shape,
    })
}

/// Action of a real operator on a real state.
pub fn t_apply(a: &RealOperator, v: &RealState) -> Result<RealState> {
    same_shape(&a.shape, &v.shape)?;
    Ok(RealState {
        re: a.re.dot(&v.re) - a.im.dot(&v.im),
        im: a.re.dot(&v.im) + a.im.dot(&v.re),
        shape: v.shape.clone(),
    })
}

/// `v^T A v` for the image of a Hermitian operator.
pub fn real_expectation(v: &RealState, a: &RealOperator) -> Result<f64> {
    let r = a.symmetry_residual();
    if r > TOLERANCE {
        return Err(Error::WrongOperatorKind { kind: "the image of a hermitian operator", residual: r });
    }
    let av = t_apply(a, v)?;
    Ok(v.re.dot(&av.re) + v.im.dot(&av.im))
}

/// Real scalar product of two states, equal to `Re<phi|psi>`.
pub fn real_overlap(a: &RealState, b: &RealState) -> Result<f64> {
    same_shape(&a.shape, &b.shape)?;
    Ok(a.re.dot(&b.re) + a.im.dot(&b.im))
}

/// Result of comparing the subspace-restriction projector with `P_perp`.
#[derive(Debug, Clone)]
pub struct MyrheimCheck {
    /// The projector, permuted to grouped order.
    pub projector: RMatrix,
    pub residual: f64,
}

/// Builds `P+ = (1 - J_A J_B)/2` (and `P+ Q+` with `Q+ = (1 - J_A J_C)/2` for
/// three parties), where `J_k = 1 (x) XZ` acts on party `k` and its flag, and
/// compares it entrywise with [`kernel_projector`].
pub fn myrheim_projector(shape: &SystemShape) -> Result<MyrheimCheck> {
    let n = shape.parties();
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedPartyCount(n));
    }
    let xz = array![[0.0, -1.0], [1.0, 0.0]];
    let local_j = |k: usize| -> RMatrix {
        let factors: Vec<RMatrix> = shape
            .dims()
            .iter()
            .enumerate()
            .map(|(i, &d)| if i == k { kron(&RMatrix::eye(d), &xz) } else { RMatrix::eye(2 * d) })
            .collect();
        kron_all(&factors)
    };
    let total = shape.expanded_dim();
    let id = RMatrix::eye(total);
    let ja = local_j(0);
    let p_plus = (&id - &ja.dot(&local_j(1))) * 0.5;
    let interleaved: RMatrix = if n == 3 {
        let q_plus = (&id - &ja.dot(&local_j(2))) * 0.5;
        p_plus.dot(&q_plus)
    } else {
        p_plus
    };
    let projector = permute_matrix(&interleaved, &shape.interleaved_factors(), &shape.interleaved_to_grouped())?;
    let residual = max_abs_diff(&projector, &kernel_projector(shape)?);
    if residual > TOLERANCE {
        return Err(Error::Violation { check: "Myrheim projector equals P_perp".into(), residual });
    }
    Ok(MyrheimCheck { projector, residual })
}

/// `re (x) I^(N) + im (x) J^(N)` recovered from an expanded matrix, with the
/// residual of the reconstruction.
pub(crate) fn compact_operator_parts(expanded: &RMatrix, shape: &SystemShape) -> Result<(RMatrix, RMatrix, f64)> {
    let n = shape.expanded_dim();
    if expanded.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, actual: expanded.nrows() });
    }
    let basis = flag_basis(shape.parties())?;
    let d = shape.main_dim();
    let e = contraction(d, basis.even());
    let o = contraction(d, basis.odd());
    let re = e.dot(expanded).dot(&e.t());
    let im = o.dot(expanded).dot(&e.t());
    let rebuilt = kron(&re, basis.identity()) + kron(&im, basis.unit());
    let residual = max_abs_diff(&rebuilt, expanded);
    Ok((re, im, residual))
}

/// Hermitian-to-symmetric and unitary-to-orthogonal residuals on the expanded
/// space. For unitaries the target is `1_D (x) I^(N)`, the identity on the
/// canonical subspace.
pub fn orthogonality_residual(u: &ComplexOperator) -> Result<f64> {
    if u.kind() != OperatorKind::Unitary {
        return Err(Error::WrongOperatorKind { kind: "unitary", residual: f64::NAN });
    }
    let e = t_map(u).expanded();
    let basis = flag_basis(u.shape().parties())?;
    let target = kron(&RMatrix::eye(u.shape().main_dim()), basis.identity());
    Ok(max_abs_diff(&e.dot(&e.t()), &target).max(max_abs_diff(&e.t().dot(&e), &target)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexqm::{pauli, ComplexOperator, Pauli};
    use crate::random;
    use crate::tensor::CVector;
    use ndarray::Array2;
    use num_complex::Complex64;

    fn zero_matrix(d: usize) -> RMatrix {
        Array2::zeros((d, d))
    }

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubit(a: Complex64, b: Complex64) -> ComplexState {
        ComplexState::new(array![a, b], SystemShape::qubits(1).unwrap()).unwrap()
    }

    /// `(S^{-1})^{(x)N}` applied factor by factor: a flag string `k` becomes
    /// the phase `i^{|k|}`. Independent of the flag-basis construction.
    fn tensored_inverse_flag_map(v: &RVector, shape: &SystemShape) -> CVector {
        let f = shape.flag_dim();
        let mut out = CVector::zeros(shape.main_dim());
        for (idx, &x) in v.iter().enumerate() {
            let phase = match (idx % f).count_ones() % 4 {
                0 => c(1.0, 0.0),
                1 => c(0.0, 1.0),
                2 => c(-1.0, 0.0),
                _ => c(0.0, -1.0),
            };
            out[idx / f] += phase * x;
        }
        out
    }

    fn basis_expanded(shape: &SystemShape, main: usize, flags: usize) -> RVector {
        let mut v = RVector::zeros(shape.expanded_dim());
        v[main * shape.flag_dim() + flags] = 1.0;
        v
    }

    #[test]
    fn s_map_examples() {
        let zero = s_map(&qubit(c(1.0, 0.0), c(0.0, 0.0)));
        assert_eq!(zero.re(), &array![1.0, 0.0]);
        assert_eq!(zero.im(), &array![0.0, 0.0]);

        let i_zero = s_map(&qubit(c(0.0, 1.0), c(0.0, 0.0)));
        assert_eq!(i_zero.re(), &array![0.0, 0.0]);
        assert_eq!(i_zero.im(), &array![1.0, 0.0]);
        assert_eq!(real_overlap(&zero, &i_zero).unwrap(), 0.0);

        let mixed = s_map(&qubit(c(H, 0.0), c(0.0, H)));
        assert_eq!(mixed.re(), &array![H, 0.0]);
        assert_eq!(mixed.im(), &array![0.0, H]);
        assert_eq!(s_inv(&mixed), qubit(c(H, 0.0), c(0.0, H)));
    }

    #[test]
    fn s_inv_examples() {
        let q = SystemShape::qubits(1).unwrap();
        let rs = RealState::new(array![0.0, 0.0], array![1.0, 0.0], q).unwrap();
        assert_eq!(s_inv(&rs).amplitudes(), &array![c(0.0, 1.0), c(0.0, 0.0)]);

        let mut rng = random::seeded(3);
        for _ in 0..20 {
            let shape = random::shape(&mut rng, 1, 3, 3);
            let psi = random::state(&mut rng, &shape);
            assert_eq!(s_inv(&s_map(&psi)), psi);
        }
    }

    #[test]
    fn flag_rotation_examples() {
        assert_eq!(flag_rotation(0.0), RMatrix::eye(2));
        let j = array![[0.0, -1.0], [1.0, 0.0]];
        assert!(max_abs_diff(&flag_rotation(std::f64::consts::FRAC_PI_2), &j) < 1e-15);
        assert!(max_abs_diff(&flag_rotation(std::f64::consts::PI), &(-RMatrix::eye(2))) < 1e-15);
    }

    #[test]
    fn t_map_examples() {
        let q = SystemShape::qubits(1).unwrap();
        let id = t_map(&ComplexOperator::identity(q.clone()));
        assert_eq!(id, RealOperator::identity(q.clone()));

        let x = t_map(&pauli(Pauli::X));
        assert_eq!(x.re(), &array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(x.im(), &zero_matrix(2));

        let y = t_map(&pauli(Pauli::Y));
        assert_eq!(y.re(), &zero_matrix(2));
        assert_eq!(y.im(), &array![[0.0, -1.0], [1.0, 0.0]]);

        // intertwining oracle for Y on random states
        let mut rng = random::seeded(11);
        for _ in 0..10 {
            let psi = random::state(&mut rng, &q);
            let lhs = t_apply(&y, &s_map(&psi)).unwrap();
            let rhs = s_map(&pauli(Pauli::Y).apply(&psi).unwrap());
            assert!(lhs.distance(&rhs) < 1e-12);
        }
    }

    #[test]
    fn t_inv_left_examples() {
        let q = SystemShape::qubits(1).unwrap();
        let id = t_inv_left(&RealOperator::identity(q.clone()).expanded(), &q).unwrap();
        assert!(max_abs_diff(id.matrix(), &CMatrix::eye(2)) < 1e-15);

        let y = RealOperator::new(zero_matrix(2), array![[0.0, -1.0], [1.0, 0.0]], q.clone()).unwrap();
        let back = t_inv_left(&y.expanded(), &q).unwrap();
        assert!(max_abs_diff(back.matrix(), pauli(Pauli::Y).matrix()) < 1e-15);

        let mut rng = random::seeded(5);
        for _ in 0..20 {
            let shape = random::shape(&mut rng, 1, 3, 2);
            let a = random::general_operator(&mut rng, &shape);
            let back = t_inv_left(&t_map(&a).expanded(), &shape).unwrap();
            assert!(max_abs_diff(back.matrix(), a.matrix()) < 1e-12);
        }
    }

    #[test]
    fn t_inv_left_rejects_matrices_outside_image() {
        let q = SystemShape::qubits(1).unwrap();
        let mut m = RMatrix::zeros((4, 4));
        m[(0, 1)] = 1.0; // |0><0|_main (x) |0><1|_flag has no I/J form
        assert!(matches!(t_inv_left(&m, &q), Err(Error::NotInImage(_))));
    }

    #[test]
    fn flag_basis_examples() {
        let b1 = flag_basis(1).unwrap();
        assert_eq!(b1.even(), &array![1.0, 0.0]);
        assert_eq!(b1.odd(), &array![0.0, 1.0]);
        let xz = pauli_real(Pauli::X).dot(&pauli_real(Pauli::Z));
        assert_eq!(b1.unit(), &xz);

        let b2 = flag_basis(2).unwrap();
        assert!(max_abs_diff(b2.even(), &array![H, 0.0, 0.0, -H]) < 1e-15);
        assert!(max_abs_diff(b2.odd(), &array![0.0, H, H, 0.0]) < 1e-15);

        // enumerate k in {0,1}^3 with even weight: 000 (+), 011, 101, 110 (-)
        let mut expected = RVector::zeros(8);
        expected[0b000] = 0.5;
        expected[0b011] = -0.5;
        expected[0b101] = -0.5;
        expected[0b110] = -0.5;
        assert!(max_abs_diff(flag_basis(3).unwrap().even(), &expected) < 1e-15);

        assert!(matches!(flag_basis(0), Err(Error::TooFewParties { .. })));
    }

    fn pauli_real(p: Pauli) -> RMatrix {
        crate::complexqm::pauli_matrix(p).mapv(|z| z.re)
    }

    #[test]
    fn flag_basis_invariants() {
        for n in 1..=5 {
            let b = flag_basis(n).unwrap();
            assert!((b.even().dot(b.even()) - 1.0).abs() < 1e-14);
            assert!((b.odd().dot(b.odd()) - 1.0).abs() < 1e-14);
            assert!(b.even().dot(b.odd()).abs() < 1e-14);
            let j2 = b.unit().dot(b.unit());
            assert!(max_abs_diff(&j2, &(-b.identity())) < 1e-14);
        }
    }

    #[test]
    fn flag_basis_cache_is_shared() {
        let a = flag_basis(4).unwrap();
        let b = flag_basis(4).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let handles: Vec<_> = (0..8).map(|_| std::thread::spawn(|| flag_basis(6).unwrap())).collect();
        let all: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert!(all.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn composition_relations() {
        for (n, m) in [(1, 1), (2, 1), (1, 2), (2, 2), (3, 2)] {
            assert!(compose_flag_basis_check(n, m).unwrap() < 1e-14);
        }
    }

    #[test]
    fn kernel_projector_examples() {
        let shape = SystemShape::qubits(2).unwrap();
        let p = kernel_projector(&shape).unwrap();
        assert!(max_abs_diff(&p.dot(&p), &p) < 1e-14);
        assert!(max_abs_diff(&p, &p.t().to_owned()) < 1e-15);

        let mut rng = random::seeded(2);
        let main = random::state(&mut rng, &shape).amplitudes().mapv(|z| z.re);
        let kernel_flags = array![1.0, 0.0, 0.0, 1.0]; // |00> + |11>
        let v = kron_vec(&main, &kernel_flags);
        assert!(max_abs(&p.dot(&v)) < 1e-14);

        assert!(matches!(kernel_projector(&SystemShape::qubits(1).unwrap()), Err(Error::TooFewParties { .. })));
    }

    #[test]
    fn canonicalize_examples() {
        let shape = SystemShape::qubits(2).unwrap();
        // S(|0>) (x) S(|1>) = |01>_AB |00>_F
        let v = basis_expanded(&shape, 0b01, 0b00);
        let canon = canonicalize(&v, &shape).unwrap();
        assert_eq!(canon.re(), &array![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(canon.im(), &array![0.0, 0.0, 0.0, 0.0]);
        assert!((canon.norm_sqr() - 1.0).abs() < 1e-15);

        // S(i|0>) (x) S(-i|1>) = -|01>_AB |11>_F, same class
        let w = -basis_expanded(&shape, 0b01, 0b11);
        assert!(canonicalize(&w, &shape).unwrap().distance(&canon) < 1e-15);

        // pure kernel element
        let k = basis_expanded(&shape, 0b10, 0b01) - basis_expanded(&shape, 0b10, 0b10);
        assert!(matches!(canonicalize(&k, &shape), Err(Error::KernelVector)));
    }

    #[test]
    fn canonicalize_matches_tensored_inverse_map() {
        let mut rng = random::seeded(9);
        for _ in 0..30 {
            let shape = random::shape(&mut rng, 1, 3, 3);
            let v: RVector = (0..shape.expanded_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let canon = canonicalize(&v, &shape).unwrap();
            let oracle = tensored_inverse_flag_map(&v, &shape);
            assert!(max_abs_diff(&join_complex_vec(canon.re(), canon.im()), &oracle) < 1e-12);
        }
    }

    use rand::Rng;

    #[test]
    fn from_canonical_roundtrip() {
        let mut rng = random::seeded(10);
        for _ in 0..10 {
            let shape = random::shape(&mut rng, 1, 3, 3);
            let s = s_map(&random::state(&mut rng, &shape));
            assert!(RealState::from_canonical(&s.to_expanded(), &shape).unwrap().distance(&s) < 1e-14);
        }
        let shape = SystemShape::qubits(2).unwrap();
        let v = basis_expanded(&shape, 0, 0);
        assert!(matches!(RealState::from_canonical(&v, &shape), Err(Error::NotInImage(_))));
    }

    #[test]
    fn expanded_tensor_regroups_factors() {
        let q = SystemShape::qubits(1).unwrap();
        let two = SystemShape::qubits(2).unwrap();
        // |1>_A |0>_A' (x) |0>_B |1>_B'  ->  |10>_AB |01>_A'B'
        let u = array![0.0, 0.0, 1.0, 0.0];
        let v = array![0.0, 1.0, 0.0, 0.0];
        assert_eq!(expanded_tensor(&u, &q, &v, &q).unwrap(), basis_expanded(&two, 0b10, 0b01));
    }

    #[test]
    fn equivalence_examples() {
        let shape = SystemShape::qubits(2).unwrap();
        let v = basis_expanded(&shape, 0b01, 0b00);
        assert!(equivalent(&v, &v, &shape).unwrap());
        assert!(equivalent(&v, &(-basis_expanded(&shape, 0b01, 0b11)), &shape).unwrap());
        // difference |01>(|00> - |01>) projects to |01>(psi_even/sqrt2 - psi_odd/sqrt2) != 0
        assert!(!equivalent(&v, &basis_expanded(&shape, 0b01, 0b01), &shape).unwrap());
    }

    #[test]
    fn flag_tensor_state_examples() {
        let zero = qubit(c(1.0, 0.0), c(0.0, 0.0));
        let one = qubit(c(0.0, 0.0), c(1.0, 0.0));
        let prod = flag_tensor_states(&s_map(&zero), &s_map(&one)).unwrap();
        assert_eq!(prod.re(), &array![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(prod.im(), &RVector::zeros(4));

        let i_zero = zero.scaled(c(0.0, 1.0));
        let mi_one = one.scaled(c(0.0, -1.0));
        let prod2 = flag_tensor_states(&s_map(&i_zero), &s_map(&mi_one)).unwrap();
        assert!(prod2.distance(&prod) < 1e-15);

        let mut rng = random::seeded(4);
        for _ in 0..20 {
            let sa = random::shape(&mut rng, 1, 2, 3);
            let sb = random::shape(&mut rng, 1, 1, 3);
            let psi = random::state(&mut rng, &sa);
            let phi = random::state(&mut rng, &sb);
            let lhs = flag_tensor_states(&s_map(&psi), &s_map(&phi)).unwrap();
            assert!(lhs.distance(&s_map(&psi.tensor(&phi).unwrap())) < 1e-12);
        }
    }

    #[test]
    fn flag_tensor_op_examples() {
        let x = pauli(Pauli::X);
        let y = pauli(Pauli::Y);
        let z = pauli(Pauli::Z);
        let xz = flag_tensor_ops(&t_map(&x), &t_map(&z)).unwrap();
        assert!(xz.distance(&t_map(&x.tensor(&z).unwrap())) < 1e-15);

        let yy = flag_tensor_ops(&t_map(&y), &t_map(&y)).unwrap();
        assert!(yy.distance(&t_map(&y.tensor(&y).unwrap())) < 1e-15);
        assert_eq!(yy.im(), &zero_matrix(4));
        let im_y = t_map(&y).im().clone();
        assert_eq!(yy.re(), &(-kron(&im_y, &im_y)));

        let id = ComplexOperator::identity(SystemShape::qubits(1).unwrap());
        let iy = flag_tensor_ops(&t_map(&id), &t_map(&y)).unwrap();
        assert!(iy.distance(&t_map(&id.tensor(&y).unwrap())) < 1e-15);
    }

    #[test]
    fn t_apply_examples() {
        let q = SystemShape::qubits(1).unwrap();
        let zero = qubit(c(1.0, 0.0), c(0.0, 0.0));
        let v = s_map(&zero);
        assert_eq!(t_apply(&RealOperator::identity(q.clone()), &v).unwrap(), v);

        let y_zero = t_apply(&t_map(&pauli(Pauli::Y)), &v).unwrap();
        let i_one = qubit(c(0.0, 0.0), c(0.0, 1.0));
        assert!(y_zero.distance(&s_map(&i_one)) < 1e-15);

        let two = SystemShape::qubits(2).unwrap();
        assert!(t_apply(&RealOperator::identity(two), &v).is_err());
    }

    #[test]
    fn expectation_and_overlap_examples() {
        let zero = s_map(&qubit(c(1.0, 0.0), c(0.0, 0.0)));
        let plus = s_map(&qubit(c(H, 0.0), c(H, 0.0)));
        assert_eq!(real_expectation(&zero, &t_map(&pauli(Pauli::Z))).unwrap(), 1.0);
        assert!(real_expectation(&plus, &t_map(&pauli(Pauli::Y))).unwrap().abs() < 1e-15);
        assert!((real_overlap(&plus, &plus).unwrap() - 1.0).abs() < 1e-15);

        let q = SystemShape::qubits(1).unwrap();
        let not_herm = RealOperator::new(array![[0.0, 1.0], [0.0, 0.0]], zero_matrix(2), q).unwrap();
        assert!(real_expectation(&zero, &not_herm).is_err());
    }

    #[test]
    fn myrheim_examples() {
        for dims in [vec![2, 2], vec![2, 2, 2], vec![3, 3], vec![2, 3]] {
            let shape = SystemShape::new(dims).unwrap();
            let check = myrheim_projector(&shape).unwrap();
            assert!(check.residual < 1e-14);
        }
        assert!(myrheim_projector(&SystemShape::qubits(4).unwrap()).is_err());
    }

    #[test]
    fn compact_parts_roundtrip() {
        let mut rng = random::seeded(21);
        let shape = SystemShape::new(vec![2, 3]).unwrap();
        let a = t_map(&random::general_operator(&mut rng, &shape));
        let (re, im, residual) = compact_operator_parts(&a.expanded(), &shape).unwrap();
        assert!(residual < 1e-12);
        assert!(max_abs_diff(&re, a.re()) < 1e-12);
        assert!(max_abs_diff(&im, a.im()) < 1e-12);
    }
}
