//! Mixed states, reduced states, the Born rule and locality on the real side.

use crate::complexqm::{ComplexOperator, OperatorKind, ZERO_PROBABILITY};
use crate::error::{Error, Result};
use crate::realmap::{compact_operator_parts, flag_basis, flag_tensor_states, t_apply, RealOperator, RealState};
use crate::tensor::{
    join_complex, kron, kron_all, max_abs_diff, outer, partial_trace, split_complex, trace, CMatrix, RMatrix,
    SystemShape, TOLERANCE,
};

/// A density operator in real form, `re (x) I^(N) + im (x) J^(N)` with
/// `re = Re(rho)/2` and `im = Im(rho)/2`.
///
/// The halving keeps the expanded trace at one; [`RealDensity::trace`] and
/// [`RealDensity::to_complex`] report physical quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct RealDensity {
    re: RMatrix,
    im: RMatrix,
    shape: SystemShape,
}

impl RealDensity {
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

    /// Trace of the expanded operator, `2 tr(re)`.
    pub fn trace(&self) -> f64 {
        2.0 * trace(&self.re)
    }

    /// `tr[rho T(A)] = 2 tr(re A_re) - 2 tr(im A_im)`.
    pub fn expectation(&self, a: &RealOperator) -> Result<f64> {
        if a.shape() != &self.shape {
            return Err(Error::InvalidShape(format!("{} vs {}", a.shape(), self.shape)));
        }
        let re: f64 = (&self.re * &a.re().t()).sum();
        let im: f64 = (&self.im * &a.im().t()).sum();
        Ok(2.0 * (re - im))
    }

    /// The complex density operator this one represents.
    pub fn to_complex(&self) -> CMatrix {
        join_complex(&(&self.re * 2.0), &(&self.im * 2.0))
    }

    /// Finite convex combination `sum_k w_k rho_k`, the form taken by states
    /// prepared with shared randomness.
    pub fn mixture(components: &[(f64, RealDensity)]) -> Result<RealDensity> {
        let Some((_, first)) = components.first() else {
            return Err(Error::InvalidEnsemble("empty mixture".into()));
        };
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if components.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > TOLERANCE {
            return Err(Error::InvalidEnsemble(format!("weights must be non-negative and sum to 1, got {total}")));
        }
        let d = first.shape.main_dim();
        let mut re = RMatrix::zeros((d, d));
        let mut im = RMatrix::zeros((d, d));
        for (w, rho) in components {
            if rho.shape != first.shape {
                return Err(Error::InvalidShape(format!("{} vs {}", rho.shape, first.shape)));
            }
            re.scaled_add(*w, &rho.re);
            im.scaled_add(*w, &rho.im);
        }
        Ok(RealDensity { re, im, shape: first.shape.clone() })
    }

    pub fn distance(&self, other: &RealDensity) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        max_abs_diff(&self.re, &other.re).max(max_abs_diff(&self.im, &other.im))
    }
}

/// Real form of a density operator, `Re(rho)/2 (x) I + Im(rho)/2 (x) J`.
pub fn t1_map(rho: &ComplexOperator) -> Result<RealDensity> {
    if rho.kind() != OperatorKind::Density {
        return Err(Error::WrongOperatorKind { kind: "a density operator", residual: f64::NAN });
    }
    let (re, im) = split_complex(rho.matrix());
    Ok(RealDensity { re: re * 0.5, im: im * 0.5, shape: rho.shape().clone() })
}

/// Validates `keep` as a non-empty proper subset and returns it sorted.
fn proper_subset(keep: &[usize], parties: usize) -> Result<Vec<usize>> {
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    if k.is_empty() || k.len() != keep.len() || k.len() >= parties || k.iter().any(|&i| i >= parties) {
        return Err(Error::InvalidSubsystems { keep: keep.to_vec(), parties });
    }
    Ok(k)
}

/// Traces out every party not in `keep` from a grouped expanded matrix,
/// removing both its main factor and its flag.
///
/// Returns the reduced matrix, in grouped order for the kept parties, and its
/// shape.
pub fn expanded_partial_trace(m: &RMatrix, shape: &SystemShape, keep: &[usize]) -> Result<(RMatrix, SystemShape)> {
    let n = shape.parties();
    let kept = proper_subset(keep, n)?;
    let factors: Vec<usize> = kept.iter().copied().chain(kept.iter().map(|&k| n + k)).collect();
    let reduced = partial_trace(m, &shape.grouped_factors(), &factors)?;
    Ok((reduced, shape.select(&kept)?))
}

/// Reads a density in real form off an expanded matrix. Fails when the matrix
/// has no `I`/`J` decomposition.
pub fn compact_density(m: &RMatrix, shape: &SystemShape) -> Result<RealDensity> {
    let (re, im, residual) = compact_operator_parts(m, shape)?;
    if residual > TOLERANCE {
        return Err(Error::NotInImage(residual));
    }
    // compact_operator_parts returns the coefficients of I and J directly
    Ok(RealDensity { re, im, shape: shape.clone() })
}

/// Reduced state of the parties in `keep`.
pub fn real_partial_trace(rho: &RealDensity, keep: &[usize]) -> Result<RealDensity> {
    let (reduced, shape) = expanded_partial_trace(&rho.expanded(), &rho.shape, keep)?;
    compact_density(&reduced, &shape)
}

/// Reduced state of a pure real state, starting from the rank-one projector
/// onto its canonical representative.
pub fn reduced_pure_state(state: &RealState, keep: &[usize]) -> Result<RealDensity> {
    let v = state.to_expanded();
    let (reduced, shape) = expanded_partial_trace(&outer(&v, &v), state.shape(), keep)?;
    compact_density(&reduced, &shape)
}

/// Largest residual of `tr_{1..M} I^(N) = I^(N-M)` and
/// `tr_{1..M} J^(N) = J^(N-M)` over the flag factors.
pub fn flag_partial_trace_residual(n: usize, m: usize) -> Result<f64> {
    if m == 0 || m >= n {
        return Err(Error::InvalidSubsystems { keep: (m..n).collect(), parties: n });
    }
    let full = flag_basis(n)?;
    let rest = flag_basis(n - m)?;
    let dims = vec![2; n];
    let keep: Vec<usize> = (m..n).collect();
    let i = partial_trace(full.identity(), &dims, &keep)?;
    let j = partial_trace(full.unit(), &dims, &keep)?;
    Ok(max_abs_diff(&i, rest.identity()).max(max_abs_diff(&j, rest.unit())))
}

/// Product of single-party states and the composite it prepares.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentPreparation {
    pub factors: Vec<RealState>,
    pub state: RealState,
}

/// Composite state of independently prepared parties, the iterated flag
/// tensor product of the factors.
pub fn independent_prep(factors: &[RealState]) -> Result<IndependentPreparation> {
    let Some(first) = factors.first() else {
        return Err(Error::TooFewParties { min: 1, actual: 0 });
    };
    if let Some(bad) = factors.iter().find(|f| f.shape().parties() != 1) {
        return Err(Error::InvalidShape(format!("factor of shape [{}] is not single-party", bad.shape())));
    }
    let mut state = first.clone();
    for f in &factors[1..] {
        state = flag_tensor_states(&state, f)?;
    }
    Ok(IndependentPreparation { factors: factors.to_vec(), state })
}

/// A single-party operator embedded into a composite system.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEmbedding {
    pub index: usize,
    pub shape: SystemShape,
    pub operator: RealOperator,
}

/// Embeds a single-party operator at position `index` of `total`, acting as
/// the identity elsewhere.
pub fn embed_local(a: &RealOperator, total: &SystemShape, index: usize) -> Result<LocalEmbedding> {
    let n = total.parties();
    if index >= n {
        return Err(Error::IndexOutOfRange { index, len: n });
    }
    if a.shape().parties() != 1 || a.shape().dims()[0] != total.dims()[index] {
        return Err(Error::InvalidShape(format!(
            "operator on [{}] cannot act on subsystem {index} of [{total}]",
            a.shape()
        )));
    }
    let pad = |block: &RMatrix| {
        let factors: Vec<RMatrix> = total
            .dims()
            .iter()
            .enumerate()
            .map(|(k, &d)| if k == index { block.clone() } else { RMatrix::eye(d) })
            .collect();
        kron_all(&factors)
    };
    let operator = RealOperator::new(pad(a.re()), pad(a.im()), total.clone())?;
    Ok(LocalEmbedding { index, shape: total.clone(), operator })
}

fn projector_residual(proj: &RealOperator) -> Result<f64> {
    let squared = proj.compose(proj)?;
    Ok(squared.distance(proj).max(proj.symmetry_residual()))
}

/// Born probability `v^T T(Pi) v`, clamped to `[0, 1]`.
pub fn real_born(state: &RealState, proj: &RealOperator) -> Result<f64> {
    let residual = projector_residual(proj)?;
    if residual > TOLERANCE {
        return Err(Error::WrongOperatorKind { kind: "the image of a projector", residual });
    }
    let pv = t_apply(proj, state)?;
    let p = state.re().dot(pv.re()) + state.im().dot(pv.im());
    Ok(p.clamp(0.0, 1.0))
}

/// Applies `T(Pi)` and renormalizes, returning the outcome probability and
/// the post-measurement state.
pub fn real_collapse(state: &RealState, proj: &RealOperator) -> Result<(f64, RealState)> {
    let p = real_born(state, proj)?;
    if p < ZERO_PROBABILITY {
        return Err(Error::ZeroProbability(p));
    }
    let pv = t_apply(proj, state)?;
    let s = 1.0 / p.sqrt();
    let collapsed = RealState::new(pv.re() * s, pv.im() * s, state.shape().clone())?;
    Ok((p, collapsed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexqm::{born_probability, pauli, BellState, ComplexState, Pauli};
    use crate::realmap::{s_map, t_map};
    use crate::{complexqm, random};
    use ndarray::array;
    use num_complex::Complex64;

    fn density(m: CMatrix, shape: SystemShape) -> ComplexOperator {
        ComplexOperator::new(m, shape, OperatorKind::Density).unwrap()
    }

    fn qubit_basis(k: usize) -> ComplexState {
        ComplexState::basis(SystemShape::qubits(1).unwrap(), k).unwrap()
    }

    #[test]
    fn t1_examples() {
        let q = SystemShape::qubits(1).unwrap();
        let zero = complexqm::ComplexOperator::projector_onto(&qubit_basis(0)).unwrap();
        let rho = t1_map(&zero.with_kind(OperatorKind::Density).unwrap()).unwrap();
        assert_eq!(rho.re(), &array![[0.5, 0.0], [0.0, 0.0]]);
        assert_eq!(rho.im(), &RMatrix::zeros((2, 2)));
        assert_eq!(rho.trace(), 1.0);
        assert!((trace(&rho.expanded()) - 1.0).abs() < 1e-15);

        let mixed = density(CMatrix::eye(2) * Complex64::new(0.5, 0.0), q.clone());
        let rho = t1_map(&mixed).unwrap();
        // re (x) I^(1) = 1/4 on the expanded space: maximally mixed over 4 dims
        assert!(max_abs_diff(&rho.expanded(), &(RMatrix::eye(4) * 0.25)) < 1e-15);

        assert!(t1_map(&pauli(Pauli::X)).is_err());
    }

    #[test]
    fn t1_expectation_matches_complex() {
        let mut rng = random::seeded(13);
        for _ in 0..20 {
            let shape = random::shape(&mut rng, 1, 2, 3);
            let rho = random::density(&mut rng, &shape);
            let a = random::hermitian(&mut rng, &shape);
            let oracle = trace(&rho.matrix().dot(a.matrix())).re;
            let real = t1_map(&rho).unwrap();
            let via_expanded = trace(&real.expanded().dot(&t_map(&a).expanded()));
            assert!((real.expectation(&t_map(&a)).unwrap() - oracle).abs() < 1e-10);
            assert!((via_expanded - oracle).abs() < 1e-10);
            assert!(max_abs_diff(&real.to_complex(), rho.matrix()) < 1e-15);
        }
    }

    #[test]
    fn flag_trace_relations() {
        for n in 2..=4 {
            for m in 1..n.min(3) {
                assert!(flag_partial_trace_residual(n, m).unwrap() < 1e-14, "n={n} m={m}");
            }
        }
        assert!(flag_partial_trace_residual(2, 2).is_err());
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = random::seeded(17);
        let sa = SystemShape::new(vec![2]).unwrap();
        let sb = SystemShape::new(vec![3]).unwrap();
        let ra = random::density(&mut rng, &sa);
        let rb = random::density(&mut rng, &sb);
        let joint = ra.tensor(&rb).unwrap().with_kind(OperatorKind::Density).unwrap();
        let reduced = real_partial_trace(&t1_map(&joint).unwrap(), &[1]).unwrap();
        assert!(reduced.distance(&t1_map(&rb).unwrap()) < 1e-12);
        let reduced = real_partial_trace(&t1_map(&joint).unwrap(), &[0]).unwrap();
        assert!(reduced.distance(&t1_map(&ra).unwrap()) < 1e-12);
    }

    #[test]
    fn partial_trace_diagram_entangled() {
        let mut rng = random::seeded(19);
        for _ in 0..10 {
            let shape = SystemShape::qubits(2).unwrap();
            let rho = random::density(&mut rng, &shape);
            let complex = partial_trace(rho.matrix(), shape.dims(), &[1]).unwrap();
            let oracle = t1_map(&density(complex, SystemShape::qubits(1).unwrap())).unwrap();
            let real = real_partial_trace(&t1_map(&rho).unwrap(), &[1]).unwrap();
            assert!(real.distance(&oracle) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_rejects_bad_keep() {
        let rho = t1_map(&random::density(&mut random::seeded(1), &SystemShape::qubits(2).unwrap())).unwrap();
        assert!(real_partial_trace(&rho, &[]).is_err());
        assert!(real_partial_trace(&rho, &[0, 1]).is_err());
        assert!(real_partial_trace(&rho, &[2]).is_err());
    }

    #[test]
    fn reduced_pure_state_is_t1_form() {
        let phi = complexqm::bell_state(BellState::PhiPlus);
        let reduced = reduced_pure_state(&s_map(&phi), &[0]).unwrap();
        let half = density(CMatrix::eye(2) * Complex64::new(0.5, 0.0), SystemShape::qubits(1).unwrap());
        assert!(reduced.distance(&t1_map(&half).unwrap()) < 1e-14);
    }

    #[test]
    fn independent_prep_examples() {
        let zero = s_map(&qubit_basis(0));
        let one = s_map(&qubit_basis(1));
        let prep = independent_prep(&[zero.clone(), one.clone()]).unwrap();
        let both = ComplexState::basis(SystemShape::qubits(2).unwrap(), 0b01).unwrap();
        assert_eq!(prep.state, s_map(&both));

        let i = Complex64::new(0.0, 1.0);
        let phased = independent_prep(&[
            s_map(&qubit_basis(0).scaled(i)),
            s_map(&qubit_basis(1).scaled(-i)),
        ])
        .unwrap();
        assert!(phased.state.distance(&prep.state) < 1e-15);

        let mut rng = random::seeded(23);
        let q = SystemShape::qubits(1).unwrap();
        let psis: Vec<_> = (0..3).map(|_| random::state(&mut rng, &q)).collect();
        let oracle = psis[0].tensor(&psis[1]).unwrap().tensor(&psis[2]).unwrap();
        let prep = independent_prep(&psis.iter().map(s_map).collect::<Vec<_>>()).unwrap();
        assert!(prep.state.distance(&s_map(&oracle)) < 1e-12);

        assert!(independent_prep(&[]).is_err());
        assert!(independent_prep(&[prep.state.clone()]).is_err());
    }

    #[test]
    fn embed_local_examples() {
        let q = SystemShape::qubits(1).unwrap();
        let two = SystemShape::qubits(2).unwrap();
        let id = t_map(&ComplexOperator::identity(q.clone()));
        for i in 0..2 {
            let e = embed_local(&id, &two, i).unwrap();
            assert_eq!(e.operator, t_map(&ComplexOperator::identity(two.clone())));
        }
        let y = pauli(Pauli::Y);
        let e = embed_local(&t_map(&y), &two, 0).unwrap();
        let padded = y.tensor(&ComplexOperator::identity(q.clone())).unwrap();
        assert!(e.operator.distance(&t_map(&padded)) < 1e-15);

        assert!(matches!(embed_local(&id, &two, 2), Err(Error::IndexOutOfRange { .. })));
        let qutrits = SystemShape::new(vec![3, 3]).unwrap();
        assert!(embed_local(&id, &qutrits, 0).is_err());
    }

    #[test]
    fn p4_for_both_parties() {
        let mut rng = random::seeded(29);
        let sa = SystemShape::new(vec![2]).unwrap();
        let sb = SystemShape::new(vec![3]).unwrap();
        let total = sa.concat(&sb).unwrap();
        for _ in 0..10 {
            let a1 = t_map(&random::general_operator(&mut rng, &sa));
            let a2 = t_map(&random::general_operator(&mut rng, &sb));
            let v1 = s_map(&random::state(&mut rng, &sa));
            let v2 = s_map(&random::state(&mut rng, &sb));
            let joint = independent_prep(&[v1.clone(), v2.clone()]).unwrap().state;

            let left = t_apply(&embed_local(&a1, &total, 0).unwrap().operator, &joint).unwrap();
            let expect = independent_prep(&[t_apply(&a1, &v1).unwrap(), v2.clone()]).unwrap().state;
            assert!(left.distance(&expect) < 1e-12);

            let right = t_apply(&embed_local(&a2, &total, 1).unwrap().operator, &joint).unwrap();
            let expect = independent_prep(&[v1.clone(), t_apply(&a2, &v2).unwrap()]).unwrap().state;
            assert!(right.distance(&expect) < 1e-12);
        }
    }

    #[test]
    fn disjoint_embeddings_compose_to_flag_product() {
        let mut rng = random::seeded(31);
        let q = SystemShape::qubits(1).unwrap();
        let two = SystemShape::qubits(2).unwrap();
        let a = t_map(&random::general_operator(&mut rng, &q));
        let b = t_map(&random::general_operator(&mut rng, &q));
        let ea = embed_local(&a, &two, 0).unwrap().operator;
        let eb = embed_local(&b, &two, 1).unwrap().operator;
        let joint = crate::realmap::flag_tensor_ops(&a, &b).unwrap();
        assert!(ea.compose(&eb).unwrap().distance(&joint) < 1e-12);
        assert!(eb.compose(&ea).unwrap().distance(&joint) < 1e-12);
    }

    #[test]
    fn born_examples() {
        let zero = s_map(&qubit_basis(0));
        let p0 = t_map(&ComplexOperator::projector_onto(&qubit_basis(0)).unwrap());
        let p1 = t_map(&ComplexOperator::projector_onto(&qubit_basis(1)).unwrap());
        assert_eq!(real_born(&zero, &p0).unwrap(), 1.0);
        assert_eq!(real_born(&zero, &p1).unwrap(), 0.0);
        assert!(real_born(&zero, &t_map(&pauli(Pauli::X))).is_err());

        let mut rng = random::seeded(37);
        for _ in 0..20 {
            let shape = random::shape(&mut rng, 1, 3, 3);
            let psi = random::state(&mut rng, &shape);
            let pi = random::projector(&mut rng, &shape);
            let oracle = born_probability(&psi, &pi).unwrap();
            assert!((real_born(&s_map(&psi), &t_map(&pi)).unwrap() - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn born_sums_to_one_over_ensemble() {
        let ens = complexqm::bell_measurement();
        let mut rng = random::seeded(41);
        let psi = s_map(&random::state(&mut rng, ens.shape()));
        let total: f64 = ens.projectors().iter().map(|p| real_born(&psi, &t_map(p)).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collapse_matches_complex() {
        let ens = complexqm::bell_measurement();
        let mut rng = random::seeded(43);
        let psi = random::state(&mut rng, ens.shape());
        for label in ens.labels() {
            let (p, post) = complexqm::measure_and_collapse(&psi, &ens, label).unwrap();
            let (rp, rpost) = real_collapse(&s_map(&psi), &t_map(ens.projector(label).unwrap())).unwrap();
            assert!((p - rp).abs() < 1e-12);
            assert!(rpost.distance(&s_map(&post)) < 1e-12);
        }
        let zero = s_map(&qubit_basis(0));
        let p1 = t_map(&ComplexOperator::projector_onto(&qubit_basis(1)).unwrap());
        assert!(matches!(real_collapse(&zero, &p1), Err(Error::ZeroProbability(_))));
    }

    #[test]
    fn mixture_of_densities() {
        let q = SystemShape::qubits(1).unwrap();
        let r0 = t1_map(&ComplexOperator::projector_onto(&qubit_basis(0)).unwrap().with_kind(OperatorKind::Density).unwrap()).unwrap();
        let r1 = t1_map(&ComplexOperator::projector_onto(&qubit_basis(1)).unwrap().with_kind(OperatorKind::Density).unwrap()).unwrap();
        let mix = RealDensity::mixture(&[(0.5, r0.clone()), (0.5, r1)]).unwrap();
        let half = density(CMatrix::eye(2) * Complex64::new(0.5, 0.0), q);
        assert!(mix.distance(&t1_map(&half).unwrap()) < 1e-15);
        assert!(RealDensity::mixture(&[(0.7, r0)]).is_err());
        assert!(RealDensity::mixture(&[]).is_err());
    }
}
