//! Seeded random matrix generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{matmul, DenseMatrix};

/// Recipe for a random symmetric positive definite matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpdSpec {
    pub size: usize,
    pub condition_number: f64,
    pub seed: u64,
}

impl SpdSpec {
    pub fn new(size: usize, condition_number: f64, seed: u64) -> Self {
        Self {
            size,
            condition_number,
            seed,
        }
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix<T> {
    DenseMatrix::from_fn(rows, cols, |_, _| T::of(rng.sample::<f64, _>(StandardNormal)))
}

/// Haar-distributed orthogonal matrix: Householder QR of a Gaussian matrix
/// with the column signs fixed by `sign(R_ii)`.
pub fn random_orthogonal<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseMatrix<T> {
    let mut a = gaussian_matrix::<T, R>(n, n, rng);
    let mut q = DenseMatrix::<T>::identity(n);
    let mut signs = vec![T::one(); n];

    for k in 0..n {
        let norm = (k..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if a[(k, k)] > T::zero() { -norm } else { norm };
        // R_kk = alpha after reflection
        signs[k] = alpha.signum();
        let mut v: Vec<T> = (k..n).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vn2 = v.iter().map(|&x| x * x).sum::<T>();
        if vn2 == T::zero() {
            continue;
        }
        let two = T::of(2.0);
        // a ← H a on the trailing block
        for j in k..n {
            let s = (k..n).map(|i| v[i - k] * a[(i, j)]).sum::<T>() * two / vn2;
            for i in k..n {
                a[(i, j)] -= s * v[i - k];
            }
        }
        // q ← q H
        for r in 0..n {
            let s = (k..n).map(|i| q[(r, i)] * v[i - k]).sum::<T>() * two / vn2;
            for i in k..n {
                q[(r, i)] -= s * v[i - k];
            }
        }
    }
    for (j, &sg) in signs.iter().enumerate() {
        for r in 0..n {
            q[(r, j)] *= sg;
        }
    }
    q
}

/// Eigenvalues spaced log-uniformly from `1/κ` up to `1`, ascending.
pub fn log_uniform_spectrum(n: usize, condition_number: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let lo = -condition_number.ln();
    (0..n)
        .map(|i| (lo * (1.0 - i as f64 / (n - 1) as f64)).exp())
        .collect()
}

/// `Q Λ Qᵀ` with a seeded Haar-orthogonal `Q` and the spectrum of
/// [`log_uniform_spectrum`]. Bit-identical for a fixed spec.
pub fn random_spd<T: Scalar>(spec: &SpdSpec) -> Result<DenseMatrix<T>> {
    if !(spec.condition_number >= 1.0) {
        return Err(Error::contract(format!(
            "condition number must be >= 1, got {}",
            spec.condition_number
        )));
    }
    if spec.size < 2 {
        return Err(Error::contract(format!("SPD size must be >= 2, got {}", spec.size)));
    }
    let spectrum: Vec<T> = log_uniform_spectrum(spec.size, spec.condition_number)
        .into_iter()
        .map(T::of)
        .collect();
    planted_spd(&spectrum, spec.seed)
}

/// `Q diag(spectrum) Qᵀ` with a seeded random orthogonal `Q`, symmetrized.
pub fn planted_spd<T: Scalar>(spectrum: &[T], seed: u64) -> Result<DenseMatrix<T>> {
    let mut rng = rng_from_seed(seed);
    let n = spectrum.len();
    let q = random_orthogonal::<T, _>(n, &mut rng);
    let ql = DenseMatrix::from_fn(n, n, |i, j| q[(i, j)] * spectrum[j]);
    matmul(&ql, &q.transpose())?.symmetrized()
}
