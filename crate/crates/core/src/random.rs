//! Random states and operators for the property suites.
//!
//! Every suite draws from a single [`ChaCha8Rng`] seeded with
//! `seed_from_u64`, so a seed reproduces the same instances on every
//! platform.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use crate::complexqm::{ComplexOperator, ComplexState, OperatorKind};
use crate::tensor::{dagger, trace, CMatrix, CVector, SystemShape};

/// The generator behind every seeded suite.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    Array2::from_shape_simple_fn((d, d), || gaussian(rng))
}

/// Between `min_parties` and `max_parties` subsystems, each of dimension
/// 2 or up to `max_dim`.
pub fn shape<R: Rng + ?Sized>(rng: &mut R, min_parties: usize, max_parties: usize, max_dim: usize) -> SystemShape {
    let n = rng.random_range(min_parties..=max_parties);
    SystemShape::new((0..n).map(|_| rng.random_range(2..=max_dim)).collect()).expect("dims >= 2")
}

/// Haar-distributed pure state.
pub fn state<R: Rng + ?Sized>(rng: &mut R, shape: &SystemShape) -> ComplexState {
    let v: CVector = (0..shape.main_dim()).map(|_| gaussian(rng)).collect();
    ComplexState::from_vector(v, shape.clone())
        .and_then(|s| s.normalized())
        .expect("gaussian vector is nonzero")
}

pub fn phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
}

/// Matrix with independent complex Gaussian entries.
pub fn general_operator<R: Rng + ?Sized>(rng: &mut R, shape: &SystemShape) -> ComplexOperator {
    ComplexOperator::general(gaussian_matrix(rng, shape.main_dim()), shape.clone()).expect("square")
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, shape: &SystemShape) -> ComplexOperator {
    let g = gaussian_matrix(rng, shape.main_dim());
    let h = (&g + &dagger(&g)) * Complex64::new(0.5, 0.0);
    ComplexOperator::new(h, shape.clone(), OperatorKind::Hermitian).expect("hermitian by construction")
}

/// Unitary from Gram-Schmidt on a Gaussian matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, shape: &SystemShape) -> ComplexOperator {
    let d = shape.main_dim();
    let mut q = gaussian_matrix(rng, d);
    for j in 0..d {
        for k in 0..j {
            let proj: Complex64 = (0..d).map(|i| q[(i, k)].conj() * q[(i, j)]).sum();
            for i in 0..d {
                let delta = proj * q[(i, k)];
                q[(i, j)] -= delta;
            }
        }
        let norm = (0..d).map(|i| q[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..d {
            q[(i, j)] /= norm;
        }
    }
    ComplexOperator::new(q, shape.clone(), OperatorKind::Unitary).expect("orthonormal columns")
}

/// Full-rank mixed state `G G^dagger / tr(G G^dagger)`.
pub fn density<R: Rng + ?Sized>(rng: &mut R, shape: &SystemShape) -> ComplexOperator {
    let g = gaussian_matrix(rng, shape.main_dim());
    let gg = g.dot(&dagger(&g));
    let t = trace(&gg);
    let mut rho = gg.mapv(|z| z / t);
    // symmetrize away rounding noise
    rho = (&rho + &dagger(&rho)) * Complex64::new(0.5, 0.0);
    ComplexOperator::new(rho, shape.clone(), OperatorKind::Density).expect("positive by construction")
}

/// Projector onto a random subspace of dimension `1..D-1` (or 1 when `D = 2`).
pub fn projector<R: Rng + ?Sized>(rng: &mut R, shape: &SystemShape) -> ComplexOperator {
    let d = shape.main_dim();
    let u = unitary(rng, shape);
    let k = rng.random_range(1..d);
    let cols = u.matrix().slice(ndarray::s![.., ..k]).to_owned();
    let p = cols.dot(&dagger(&cols));
    let p = (&p + &dagger(&p)) * Complex64::new(0.5, 0.0);
    ComplexOperator::new(p, shape.clone(), OperatorKind::Projector).expect("orthonormal columns")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let shape = SystemShape::new(vec![2, 3]).unwrap();
        let a = state(&mut seeded(7), &shape);
        let b = state(&mut seeded(7), &shape);
        assert_eq!(a, b);
        assert_ne!(a, state(&mut seeded(8), &shape));
    }

    #[test]
    fn generated_operators_validate() {
        let mut rng = seeded(1);
        for _ in 0..20 {
            let s = shape(&mut rng, 1, 3, 3);
            unitary(&mut rng, &s);
            density(&mut rng, &s);
            projector(&mut rng, &s);
            hermitian(&mut rng, &s);
        }
    }
}
