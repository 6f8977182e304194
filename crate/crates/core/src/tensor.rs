//! Dense tensor-product arithmetic over multipartite shapes.
//!
//! Storage is row-major with big-endian subsystem order: the first factor of
//! a product varies slowest, so `|k1 k2 .. kN>` maps to the flat index
//! `k1*d2*..*dN + .. + kN`.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

pub type RVector = Array1<f64>;
pub type CVector = Array1<Complex64>;
pub type RMatrix = Array2<f64>;
pub type CMatrix = Array2<Complex64>;

/// Absolute entrywise tolerance used for every equality check.
pub const TOLERANCE: f64 = 1e-9;

/// Largest party count for which flag spaces (dimension `2^N`) are built.
pub const MAX_PARTIES: usize = 10;

/// Scalar types the tensor routines operate on.
pub trait Entry:
    Copy
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn magnitude(self) -> f64;
}

impl Entry for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Entry for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Local dimensions of an `N`-party system.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemShape {
    dims: Vec<usize>,
}

impl SystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("at least one subsystem is required".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidShape(format!("local dimension {d} is below 2")));
        }
        if dims.len() > MAX_PARTIES {
            return Err(Error::UnsupportedPartyCount(dims.len()));
        }
        Ok(Self { dims })
    }

    /// `n` qubits.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    /// `D = d1 * .. * dN`.
    pub fn main_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// `2^N`.
    pub fn flag_dim(&self) -> usize {
        1 << self.parties()
    }

    /// `D * 2^N`, the dimension of the uncompressed real space.
    pub fn expanded_dim(&self) -> usize {
        self.main_dim() * self.flag_dim()
    }

    /// Factor dimensions of the expanded space in grouped order:
    /// all main factors, then one two-dimensional flag per party.
    pub fn grouped_factors(&self) -> Vec<usize> {
        let mut f = self.dims.clone();
        f.extend(std::iter::repeat_n(2, self.parties()));
        f
    }

    /// Factor dimensions in interleaved order `(m1, f1, m2, f2, ..)`.
    pub fn interleaved_factors(&self) -> Vec<usize> {
        self.dims.iter().flat_map(|&d| [d, 2]).collect()
    }

    /// Permutation taking the interleaved factor order to the grouped one,
    /// in the convention of [`permute_vector`].
    pub fn interleaved_to_grouped(&self) -> Vec<usize> {
        let n = self.parties();
        (0..n).map(|i| 2 * i).chain((0..n).map(|i| 2 * i + 1)).collect()
    }

    pub fn concat(&self, other: &SystemShape) -> Result<SystemShape> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SystemShape::new(dims)
    }

    /// Shape of the subsystems listed in `keep` (in ascending order).
    pub fn select(&self, keep: &[usize]) -> Result<SystemShape> {
        let keep = normalize_keep(keep, self.parties())?;
        SystemShape::new(keep.iter().map(|&i| self.dims[i]).collect())
    }
}

impl std::fmt::Display for SystemShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Kronecker product of two matrices.
pub fn kron<T: Entry>(a: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<T>::zeros((ar * br, ac * bc));
    for ((i, j), &x) in a.indexed_iter() {
        if x.is_zero() {
            continue;
        }
        for ((k, l), &y) in b.indexed_iter() {
            out[(i * br + k, j * bc + l)] = x * y;
        }
    }
    out
}

/// Kronecker product of two vectors.
pub fn kron_vec<T: Entry>(a: &Array1<T>, b: &Array1<T>) -> Array1<T> {
    let n = b.len();
    let mut out = Array1::<T>::zeros(a.len() * n);
    for (i, &x) in a.iter().enumerate() {
        for (k, &y) in b.iter().enumerate() {
            out[i * n + k] = x * y;
        }
    }
    out
}

/// Kronecker product of a list of matrices, left to right.
pub fn kron_all<T: Entry>(factors: &[Array2<T>]) -> Array2<T> {
    let mut acc = Array2::<T>::eye(1);
    for f in factors {
        acc = kron(&acc, f);
    }
    acc
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

fn check_permutation(perm: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    if perm.len() != k {
        return Err(Error::InvalidPermutation(perm.to_vec()));
    }
    for &p in perm {
        if p >= k || seen[p] {
            return Err(Error::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// For every flat output index, the flat input index it is read from.
///
/// Output factor `j` is input factor `perm[j]`.
fn permutation_map(dims: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(perm, dims.len())?;
    let in_strides = strides(dims);
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let total: usize = dims.iter().product();

    let mut map = Vec::with_capacity(total);
    let mut digits = vec![0usize; dims.len()];
    let mut src = 0usize;
    for _ in 0..total {
        map.push(src);
        // odometer increment, last digit fastest
        for j in (0..digits.len()).rev() {
            digits[j] += 1;
            src += src_strides[j];
            if digits[j] < out_dims[j] {
                break;
            }
            src -= src_strides[j] * digits[j];
            digits[j] = 0;
        }
    }
    Ok(map)
}

/// Inverse of a permutation in the convention of [`permute_vector`].
pub fn inverse_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(perm, perm.len())?;
    let mut inv = vec![0; perm.len()];
    for (j, &p) in perm.iter().enumerate() {
        inv[p] = j;
    }
    Ok(inv)
}

/// Reorder the tensor factors of `v`. Factor `j` of the result is factor
/// `perm[j]` of the input.
pub fn permute_vector<T: Entry>(v: &Array1<T>, dims: &[usize], perm: &[usize]) -> Result<Array1<T>> {
    let total: usize = dims.iter().product();
    if v.len() != total {
        return Err(Error::DimensionMismatch { expected: total, actual: v.len() });
    }
    let map = permutation_map(dims, perm)?;
    Ok(map.iter().map(|&src| v[src]).collect())
}

/// Reorder the tensor factors of an operator (rows and columns alike).
pub fn permute_matrix<T: Entry>(m: &Array2<T>, dims: &[usize], perm: &[usize]) -> Result<Array2<T>> {
    let total: usize = dims.iter().product();
    if m.dim() != (total, total) {
        return Err(Error::DimensionMismatch { expected: total, actual: m.nrows() });
    }
    let map = permutation_map(dims, perm)?;
    Ok(Array2::from_shape_fn((total, total), |(r, c)| m[(map[r], map[c])]))
}

fn normalize_keep(keep: &[usize], parties: usize) -> Result<Vec<usize>> {
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    if k.is_empty() || k.len() != keep.len() || k.iter().any(|&i| i >= parties) {
        return Err(Error::InvalidSubsystems { keep: keep.to_vec(), parties });
    }
    Ok(k)
}

/// Flat offsets of every configuration of `subsystems`, enumerated row-major.
fn offsets(dims: &[usize], subsystems: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &s in subsystems {
        let stride = st[s];
        out = out
            .iter()
            .flat_map(|&o| (0..dims[s]).map(move |k| o + k * stride))
            .collect();
    }
    out
}

/// Partial trace over every factor not listed in `keep`.
///
/// The kept factors appear in ascending index order in the result.
pub fn partial_trace<T: Entry>(rho: &Array2<T>, dims: &[usize], keep: &[usize]) -> Result<Array2<T>> {
    let total: usize = dims.iter().product();
    if rho.dim() != (total, total) {
        return Err(Error::DimensionMismatch { expected: total, actual: rho.nrows() });
    }
    let keep = normalize_keep(keep, dims.len())?;
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let kept_off = offsets(dims, &keep);
    let traced_off = offsets(dims, &traced);

    let n = kept_off.len();
    let mut out = Array2::<T>::zeros((n, n));
    for (r, &ro) in kept_off.iter().enumerate() {
        for (c, &co) in kept_off.iter().enumerate() {
            let mut acc = T::zero();
            for &t in &traced_off {
                acc = acc + rho[(ro + t, co + t)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

pub fn trace<T: Entry>(m: &Array2<T>) -> T {
    m.diag().iter().fold(T::zero(), |acc, &x| acc + x)
}

/// Largest entrywise absolute difference. Mismatched shapes give infinity.
pub fn max_abs_diff<T: Entry, D: ndarray::Dimension>(
    a: &ndarray::Array<T, D>,
    b: &ndarray::Array<T, D>,
) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y).magnitude())
        .fold(0.0, f64::max)
}

pub fn max_abs<T: Entry, D: ndarray::Dimension>(a: &ndarray::Array<T, D>) -> f64 {
    a.iter().map(|&x| x.magnitude()).fold(0.0, f64::max)
}

/// Numerical rank by Gaussian elimination with partial pivoting.
///
/// A pivot counts when its magnitude exceeds `tol` times the largest entry.
pub fn rank(m: &RMatrix, tol: f64) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.dim();
    let scale = max_abs(&a).max(f64::MIN_POSITIVE);
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let (pivot, value) = (rank..rows)
            .map(|r| (r, a[(r, col)].abs()))
            .fold((rank, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if value <= tol * scale {
            continue;
        }
        if pivot != rank {
            for c in 0..cols {
                a.swap((pivot, c), (rank, c));
            }
        }
        let p = a[(rank, col)];
        for r in rank + 1..rows {
            let f = a[(r, col)] / p;
            if f != 0.0 {
                for c in col..cols {
                    a[(r, c)] -= f * a[(rank, c)];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Real and imaginary parts of a complex matrix.
pub fn split_complex(m: &CMatrix) -> (RMatrix, RMatrix) {
    (m.mapv(|z| z.re), m.mapv(|z| z.im))
}

pub fn join_complex(re: &RMatrix, im: &RMatrix) -> CMatrix {
    ndarray::Zip::from(re).and(im).map_collect(|&r, &i| Complex64::new(r, i))
}

pub fn join_complex_vec(re: &RVector, im: &RVector) -> CVector {
    ndarray::Zip::from(re).and(im).map_collect(|&r, &i| Complex64::new(r, i))
}

/// Conjugate transpose.
pub fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

/// `|u><v|` for real vectors.
pub fn outer(u: &RVector, v: &RVector) -> RMatrix {
    Array2::from_shape_fn((u.len(), v.len()), |(i, j)| u[i] * v[j])
}
