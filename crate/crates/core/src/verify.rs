//! Seeded property suites for the maps between the two formalisms.
//!
//! Each suite draws random instances, measures the largest deviation from
//! the identity it checks and passes when that residual stays below the
//! tolerance. All suites in a run share one generator, seeded once, and run
//! in a fixed order.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::complexqm::{expectation, ComplexOperator, ComplexState, OperatorKind};
use crate::error::{Error, Result};
use crate::random;
use crate::realmap::{
    canonicalize, compose_flag_basis_check, expanded_tensor, flag_basis, flag_rotation, flag_tensor_states,
    kernel_projector, myrheim_projector, orthogonality_residual, project_canonical, real_expectation, real_overlap,
    s_map, t_apply, t_map, RealState,
};
use crate::realqm::{
    embed_local, flag_partial_trace_residual, independent_prep, real_born, real_partial_trace, t1_map,
};
use crate::tensor::{kron, kron_vec, max_abs_diff, partial_trace, rank, RMatrix, RVector, SystemShape};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub trials: usize,
    pub max_residual: f64,
    pub pass: bool,
    /// Set when an instance raised an error instead of producing a residual.
    pub error: Option<String>,
}

/// Parameters shared by every suite in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
    /// Largest local dimension drawn.
    pub max_dim: usize,
    /// Largest party count drawn.
    pub max_parties: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 0, trials: 200, tolerance: crate::TOLERANCE, max_dim: 3, max_parties: 3 }
    }
}

type Trial = fn(&mut ChaCha8Rng, &SuiteConfig) -> Result<f64>;

/// Every random suite, in run order.
pub const RANDOM_SUITES: [(&str, Trial); 13] = [
    ("norm preservation", norm_preservation),
    ("phase covariance", phase_covariance),
    ("flag rotation commutes with T", rotation_commutation),
    ("homomorphism", homomorphism),
    ("expectation preservation", expectation_preservation),
    ("intertwining", intertwining),
    ("scalar product", scalar_product),
    ("hermitian to symmetric", hermitian_to_symmetric),
    ("unitary to orthogonal", unitary_to_orthogonal),
    ("trace preservation of T1", t1_trace),
    ("partial trace diagram", partial_trace_diagram),
    ("locality embeddings", locality),
    ("quotient consistency of flag product", quotient_consistency),
];

fn run_suite(name: &'static str, trials: usize, tol: f64, mut trial: impl FnMut() -> Result<f64>) -> SuiteResult {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        match trial() {
            Ok(r) if r.is_nan() => {
                return SuiteResult { name, trials, max_residual: f64::NAN, pass: false, error: Some("NaN residual".into()) }
            }
            Ok(r) => worst = worst.max(r),
            Err(e) => {
                return SuiteResult { name, trials, max_residual: f64::INFINITY, pass: false, error: Some(e.to_string()) }
            }
        }
    }
    SuiteResult { name, trials, max_residual: worst, pass: worst < tol, error: None }
}

/// Runs the random suites followed by the deterministic ones.
pub fn run_all(config: &SuiteConfig) -> Vec<SuiteResult> {
    let mut rng = random::seeded(config.seed);
    let mut results: Vec<SuiteResult> = RANDOM_SUITES
        .iter()
        .map(|&(name, trial)| run_suite(name, config.trials, config.tolerance, || trial(&mut rng, config)))
        .collect();
    results.extend(structural_suites(config.tolerance));
    results
}

/// Checks that do not draw random instances.
pub fn structural_suites(tol: f64) -> Vec<SuiteResult> {
    let pairs = [(1, 1), (1, 2), (2, 1), (2, 2)];
    let mut it = pairs.iter();
    let composition = run_suite("flag basis composition", pairs.len(), tol, || {
        let &(n, m) = it.next().expect("one trial per pair");
        compose_flag_basis_check(n, m)
    });

    let trace_cases: Vec<(usize, usize)> = (2..=4).flat_map(|n| (1..n.min(3)).map(move |m| (n, m))).collect();
    let mut it = trace_cases.iter();
    let flag_traces = run_suite("flag partial trace relations", trace_cases.len(), tol, || {
        let &(n, m) = it.next().expect("one trial per case");
        flag_partial_trace_residual(n, m)
    });

    let rank_cases = [vec![2, 2], vec![2, 2, 2], vec![3, 3]];
    let mut it = rank_cases.iter();
    let ranks = run_suite("kernel projector rank", rank_cases.len(), tol, || {
        let shape = SystemShape::new(it.next().expect("one trial per case").clone())?;
        kernel_rank_residual(&shape)
    });

    let kernel = run_suite("kernel characterization", 2, tol, {
        let mut dims = [2, 3].into_iter();
        move || kernel_span_residual(dims.next().expect("one trial per dimension"))
    });

    let myrheim_cases = [vec![2, 2], vec![2, 2, 2], vec![3, 3]];
    let mut it = myrheim_cases.iter();
    let myrheim = run_suite("subspace restriction projector", myrheim_cases.len(), tol, || {
        let shape = SystemShape::new(it.next().expect("one trial per case").clone())?;
        myrheim_projector(&shape).map(|c| c.residual)
    });

    vec![composition, flag_traces, ranks, kernel, myrheim]
}

/// `|rank(P_perp) - 2D|`, zero when the canonical subspace has the expected
/// dimension.
pub fn kernel_rank_residual(shape: &SystemShape) -> Result<f64> {
    let p = kernel_projector(shape)?;
    let r = rank(&p, 1e-10);
    Ok((r as f64 - 2.0 * shape.main_dim() as f64).abs())
}

/// For two parties of dimension `d`: the vectors `x (x) (|00> + |11>)` and
/// `x (x) (|01> - |10>)` are annihilated by `P_perp` and together with its
/// range span the whole expanded space. Returns the larger of the
/// annihilation residual and the dimension deficit.
pub fn kernel_span_residual(d: usize) -> Result<f64> {
    let shape = SystemShape::new(vec![d, d])?;
    let p = kernel_projector(&shape)?;
    let dd = shape.main_dim();
    let kernel_flags = [ndarray::array![1.0, 0.0, 0.0, 1.0], ndarray::array![0.0, 1.0, -1.0, 0.0]];
    let mut span = RMatrix::zeros((shape.expanded_dim(), 2 * dd));
    let mut annihilation: f64 = 0.0;
    for (f, flags) in kernel_flags.iter().enumerate() {
        for k in 0..dd {
            let mut x = RVector::zeros(dd);
            x[k] = 1.0;
            let v = kron_vec(&x, flags);
            annihilation = annihilation.max(p.dot(&v).iter().fold(0.0, |m, z| m.max(z.abs())));
            span.column_mut(f * dd + k).assign(&v);
        }
    }
    let kernel_rank = rank(&span, 1e-10);
    let total = rank(&p, 1e-10) + kernel_rank;
    Ok(annihilation.max((total as f64 - shape.expanded_dim() as f64).abs()))
}

fn shape(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> SystemShape {
    random::shape(rng, 1, c.max_parties, c.max_dim)
}

/// Shape with at least two parties, total at most `max_parties`.
fn composite_shape(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> SystemShape {
    random::shape(rng, 2, c.max_parties.max(2), c.max_dim)
}

fn state_residual(a: &RealState, b: &RealState) -> f64 {
    a.distance(b)
}

fn norm_preservation(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = shape(rng, c);
    let psi = random::state(rng, &s);
    let v = s_map(&psi);
    let expanded = v.to_expanded();
    Ok((v.norm_sqr() - 1.0).abs().max((expanded.dot(&expanded) - 1.0).abs()))
}

/// `S(e^{ia} psi) = (1 (x) R_F(a)) S(psi)` in single-flag form, and the
/// matching rotation `cos a I^(N) + sin a J^(N)` on canonical vectors.
fn phase_covariance(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = shape(rng, c);
    let psi = random::state(rng, &s);
    let alpha = random::phase(rng);
    let rotated = s_map(&psi.scaled(Complex64::from_polar(1.0, alpha)));
    let v = s_map(&psi);

    let d = s.main_dim();
    let single = kron(&RMatrix::eye(d), &flag_rotation(alpha)).dot(&v.single_flag());
    let r1 = max_abs_diff(&single, &rotated.single_flag());

    let basis = flag_basis(s.parties())?;
    let flag_rot = basis.identity() * alpha.cos() + basis.unit() * alpha.sin();
    let expanded = kron(&RMatrix::eye(d), &flag_rot).dot(&v.to_expanded());
    let r2 = max_abs_diff(&expanded, &rotated.to_expanded());
    Ok(r1.max(r2))
}

fn rotation_commutation(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = shape(rng, c);
    let a = t_map(&random::general_operator(rng, &s)).expanded();
    let alpha = random::phase(rng);
    let basis = flag_basis(s.parties())?;
    let r = kron(&RMatrix::eye(s.main_dim()), &(basis.identity() * alpha.cos() + basis.unit() * alpha.sin()));
    Ok(max_abs_diff(&a.dot(&r), &r.dot(&a)))
}

fn homomorphism(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = shape(rng, c);
    let a1 = random::general_operator(rng, &s);
    let a2 = random::general_operator(rng, &s);
    let lhs = t_map(&a1.compose(&a2)?);
    let rhs = t_map(&a1).compose(&t_map(&a2))?;
    Ok(lhs.distance(&rhs))
}

fn expectation_preservation(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = shape(rng, c);
    let psi = random::state(rng, &s);
    let h = random::hermitian(rng, &s);
    Ok((real_expectation(&s_map(&psi), &t_map(&h))? - expectation(&psi, &h)?).abs())
}

fn intertwining(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = shape(rng, c);
    let psi = random::state(rng, &s);
    let a = random::general_operator(rng, &s);
    let lhs = t_apply(&t_map(&a), &s_map(&psi))?;
    let image = ComplexState::from_vector(a.matrix().dot(psi.amplitudes()), s)?;
    Ok(state_residual(&lhs, &s_map(&image)))
}

fn scalar_product(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = shape(rng, c);
    let phi = random::state(rng, &s);
    let psi = random::state(rng, &s);
    Ok((real_overlap(&s_map(&phi), &s_map(&psi))? - phi.inner(&psi)?.re).abs())
}

fn hermitian_to_symmetric(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = shape(rng, c);
    let e = t_map(&random::hermitian(rng, &s)).expanded();
    Ok(max_abs_diff(&e, &e.t().to_owned()))
}

fn unitary_to_orthogonal(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = shape(rng, c);
    orthogonality_residual(&random::unitary(rng, &s))
}

/// Expanded trace of `T1(rho)` and `tr[T1(rho) T(A)] = tr(rho A)`.
fn t1_trace(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = shape(rng, c);
    let rho = random::density(rng, &s);
    let a = random::hermitian(rng, &s);
    let real = t1_map(&rho)?;
    let oracle = crate::tensor::trace(&rho.matrix().dot(a.matrix())).re;
    let trace = crate::tensor::trace(&real.expanded());
    Ok((trace - 1.0).abs().max((real.expectation(&t_map(&a))? - oracle).abs()))
}

fn random_keep(rng: &mut ChaCha8Rng, parties: usize) -> Vec<usize> {
    loop {
        let keep: Vec<usize> = (0..parties).filter(|_| rng.random_bool(0.5)).collect();
        if !keep.is_empty() && keep.len() < parties {
            return keep;
        }
    }
}

/// Partial trace commutes with `T1`, on alternating product and entangled
/// inputs.
fn partial_trace_diagram(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let s = composite_shape(rng, c);
    let rho = if rng.random_bool(0.5) {
        random::density(rng, &s)
    } else {
        let mut factors = s.dims().iter().map(|&d| random::density(rng, &SystemShape::new(vec![d]).expect("d >= 2")));
        let first = factors.next().expect("at least two parties");
        factors.try_fold(first, |acc, f| acc.tensor(&f))?.with_kind(OperatorKind::Density)?
    };
    let keep = random_keep(rng, s.parties());
    let reduced = partial_trace(rho.matrix(), s.dims(), &keep)?;
    let oracle = t1_map(&ComplexOperator::new(reduced, s.select(&keep)?, OperatorKind::Density)?)?;
    Ok(real_partial_trace(&t1_map(&rho)?, &keep)?.distance(&oracle))
}

/// Both locality equalities on a random bipartite instance, plus Born
/// probabilities of embedded local projectors.
fn locality(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let sa = SystemShape::new(vec![rng.random_range(2..=c.max_dim)])?;
    let sb = SystemShape::new(vec![rng.random_range(2..=c.max_dim)])?;
    let total = sa.concat(&sb)?;
    let a1 = t_map(&random::general_operator(rng, &sa));
    let a2 = t_map(&random::general_operator(rng, &sb));
    let v1 = s_map(&random::state(rng, &sa));
    let v2 = s_map(&random::state(rng, &sb));
    let joint = independent_prep(&[v1.clone(), v2.clone()])?.state;

    let left = t_apply(&embed_local(&a1, &total, 0)?.operator, &joint)?;
    let left_expected = independent_prep(&[t_apply(&a1, &v1)?, v2.clone()])?.state;
    let right = t_apply(&embed_local(&a2, &total, 1)?.operator, &joint)?;
    let right_expected = independent_prep(&[v1.clone(), t_apply(&a2, &v2)?])?.state;

    let pi = random::projector(rng, &sa);
    let local_born = real_born(&joint, &embed_local(&t_map(&pi), &total, 0)?.operator)?;
    let marginal = real_born(&v1, &t_map(&pi))?;

    Ok(left.distance(&left_expected).max(right.distance(&right_expected)).max((local_born - marginal).abs()))
}

/// A representative of the class of `s_map(psi)` in product-of-flags form:
/// `Re psi (x) |0..0> + Im psi (x) |10..0>`, plus a random kernel vector.
fn noisy_representative(rng: &mut ChaCha8Rng, psi: &ComplexState) -> Result<RVector> {
    let s = psi.shape();
    let f = s.flag_dim();
    let mut v = RVector::zeros(s.expanded_dim());
    for (k, z) in psi.amplitudes().iter().enumerate() {
        v[k * f] = z.re;
        v[k * f + f / 2] = z.im;
    }
    let noise: RVector = (0..v.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let kernel = &noise - &project_canonical(&noise, s)?;
    Ok(v + kernel)
}

/// The flag product of classes does not depend on the representatives and
/// matches the complex tensor product.
fn quotient_consistency(rng: &mut ChaCha8Rng, c: &SuiteConfig) -> Result<f64> {
    let max_a = c.max_parties.saturating_sub(1).max(1);
    let sa = random::shape(rng, 1, max_a, c.max_dim);
    let remaining = c.max_parties.saturating_sub(sa.parties()).max(1);
    let sb = random::shape(rng, 1, remaining, c.max_dim);
    let psi_a = random::state(rng, &sa);
    let psi_b = random::state(rng, &sb);
    let va = noisy_representative(rng, &psi_a)?;
    let vb = noisy_representative(rng, &psi_b)?;

    let joint_shape = sa.concat(&sb)?;
    let joint = canonicalize(&expanded_tensor(&va, &sa, &vb, &sb)?, &joint_shape)?;
    let oracle = s_map(&psi_a.tensor(&psi_b)?);
    let via_factors = flag_tensor_states(&canonicalize(&va, &sa)?, &canonicalize(&vb, &sb)?)?;
    Ok(joint.distance(&oracle).max(via_factors.distance(&oracle)))
}

/// Error for a named suite that did not pass, for callers that want a
/// `Result`.
pub fn require(result: &SuiteResult) -> Result<()> {
    if result.pass {
        Ok(())
    } else {
        Err(Error::Violation { check: result.name.to_string(), residual: result.max_residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SuiteConfig {
        SuiteConfig { seed: 1, trials: 10, ..SuiteConfig::default() }
    }

    #[test]
    fn quick_run_passes() {
        for r in run_all(&quick()) {
            assert!(r.pass, "{} failed: residual {:e} {:?}", r.name, r.max_residual, r.error);
        }
    }

    #[test]
    fn same_seed_same_residuals() {
        let a = run_all(&quick());
        let b = run_all(&quick());
        assert_eq!(a, b);
    }

    #[test]
    fn failing_trial_is_reported() {
        let r = run_suite("always fails", 3, 1e-9, || Err(Error::KernelVector));
        assert!(!r.pass);
        assert!(r.error.is_some());
        assert!(require(&r).is_err());
        let r = run_suite("too large", 3, 1e-9, || Ok(1.0));
        assert!(!r.pass && r.error.is_none());
    }

    #[test]
    fn kernel_rank_examples() {
        for dims in [vec![2, 2], vec![2, 2, 2]] {
            assert_eq!(kernel_rank_residual(&SystemShape::new(dims).unwrap()).unwrap(), 0.0);
        }
        assert_eq!(kernel_span_residual(2).unwrap(), 0.0);
    }

    #[test]
    fn noisy_representative_is_in_class() {
        let mut rng = random::seeded(3);
        let s = SystemShape::new(vec![2, 3]).unwrap();
        let psi = random::state(&mut rng, &s);
        let v = noisy_representative(&mut rng, &psi).unwrap();
        assert!(canonicalize(&v, &s).unwrap().distance(&s_map(&psi)) < 1e-12);
    }
}
