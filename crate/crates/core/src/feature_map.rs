//! Injective normalized kernel embedding.
//!
//! A query's similarity vector `g_i = [k(q_i, k_1), …, k(q_i, k_N)]` is
//! centered by its own scalar mean, whitened across the batch, and offset by
//! `1/N`:
//!
//! ```text
//! z_i = Σ^{-1/2} (g_i − mean(g_i)·1) + (1/N)·1
//! ```
//!
//! Two whitening estimators are provided. [`WhiteningKind::Diagonal`]
//! standardizes each similarity coordinate with batch statistics and is
//! linear in `N`; [`WhiteningKind::Full`] applies the inverse square root of
//! the full `N × N` covariance and is kept as a small-scale reference.

use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, KernelSpec};
use crate::linalg::{sym_eig, DenseMatrix};
use crate::scalar::Scalar;

/// Full whitening refuses similarity vectors longer than this.
pub const FULL_WHITEN_LIMIT: usize = 256;

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WhiteningKind {
    Full,
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhiteningMode<T = f64> {
    kind: WhiteningKind,
    epsilon: T,
}

impl<T: Scalar> WhiteningMode<T> {
    pub fn new(kind: WhiteningKind, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::contract(format!("whitening epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { kind, epsilon })
    }

    pub fn diagonal(epsilon: T) -> Result<Self> {
        Self::new(WhiteningKind::Diagonal, epsilon)
    }

    pub fn full(epsilon: T) -> Result<Self> {
        Self::new(WhiteningKind::Full, epsilon)
    }

    pub fn kind(&self) -> WhiteningKind {
        self.kind
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }
}

impl Default for WhiteningMode<f64> {
    fn default() -> Self {
        Self {
            kind: WhiteningKind::Diagonal,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Similarity vectors and their embeddings, row-aligned.
#[derive(Clone, Debug)]
pub struct EmbeddingBatch<T = f64> {
    pub g: DenseMatrix<T>,
    pub z: DenseMatrix<T>,
    pub mode: WhiteningMode<T>,
}

/// Row `i` is `g_i`, the kernel similarities of query `i` to every key.
pub fn similarity_vectors<T: Scalar>(q: &DenseMatrix<T>, k: &DenseMatrix<T>, spec: &KernelSpec<T>) -> Result<DenseMatrix<T>> {
    kernel_matrix(q, k, spec)
}

/// Per-column standardization with batch statistics:
/// `g̃_ij = (g_ij − μ_j) / √(σ_j² + ε)`, population variance.
///
/// Returns `(g̃, μ, σ²)`. A column whose `σ_j² + ε` is zero maps to zeros.
pub fn diagonal_whiten<T: Scalar>(g: &DenseMatrix<T>, epsilon: T) -> (DenseMatrix<T>, Vec<T>, Vec<T>) {
    let mut out = g.clone();
    let (mu, sigma2) = diagonal_whiten_in_place(&mut out, epsilon);
    (out, mu, sigma2)
}

pub(crate) fn diagonal_whiten_in_place<T: Scalar>(g: &mut DenseMatrix<T>, epsilon: T) -> (Vec<T>, Vec<T>) {
    let (b, n) = g.shape();
    let inv_b = T::one() / T::of_usize(b);
    let mut mu = vec![T::zero(); n];
    for row in g.row_iter() {
        for (m, &v) in mu.iter_mut().zip(row) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m *= inv_b);

    let mut sigma2 = vec![T::zero(); n];
    for row in g.row_iter() {
        for ((s, &v), &m) in sigma2.iter_mut().zip(row).zip(&mu) {
            let d = v - m;
            *s += d * d;
        }
    }
    sigma2.iter_mut().for_each(|s| *s *= inv_b);

    let inv_std: Vec<T> = sigma2
        .iter()
        .map(|&s| {
            let denom = (s + epsilon).sqrt();
            if denom > T::zero() {
                T::one() / denom
            } else {
                T::zero()
            }
        })
        .collect();
    for i in 0..b {
        for ((v, &m), &w) in g.row_mut(i).iter_mut().zip(&mu).zip(&inv_std) {
            *v = (*v - m) * w;
        }
    }
    (mu, sigma2)
}

/// Rows mapped to `(Σ + εI)^{-1/2} (g_i − ḡ)` where `Σ` is the population
/// covariance of the rows of `g`.
pub fn full_whiten<T: Scalar>(g: &DenseMatrix<T>, epsilon: T) -> Result<DenseMatrix<T>> {
    let (b, n) = g.shape();
    if n > FULL_WHITEN_LIMIT {
        return Err(Error::ScaleGuard {
            n,
            limit: FULL_WHITEN_LIMIT,
        });
    }
    if b < 2 {
        return Err(Error::contract(format!("full whitening needs at least 2 rows, got {b}")));
    }
    let inv_b = T::one() / T::of_usize(b);
    let mut mean = vec![T::zero(); n];
    for row in g.row_iter() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_b);
    let centered = DenseMatrix::from_fn(b, n, |i, j| g[(i, j)] - mean[j]);

    let mut cov: DenseMatrix<T> = DenseMatrix::zeros(n, n);
    for row in centered.row_iter() {
        for a in 0..n {
            let ra = row[a];
            if ra == T::zero() {
                continue;
            }
            for c in a..n {
                cov[(a, c)] += ra * row[c];
            }
        }
    }
    for a in 0..n {
        for c in a..n {
            let v = cov[(a, c)] * inv_b;
            cov[(a, c)] = v;
            cov[(c, a)] = v;
        }
    }

    let eig = sym_eig(&cov)?;
    let inv_sqrt = eig.apply_spectral(|l| T::one() / (l.max(T::zero()) + epsilon).sqrt());
    crate::linalg::matmul(&centered, &inv_sqrt)
}

/// Row-centers `g`, whitens it with `mode`, and adds `1/N` to every entry
/// (`N = g.cols()`).
pub fn embed_similarities<T: Scalar>(g: &DenseMatrix<T>, mode: &WhiteningMode<T>) -> Result<DenseMatrix<T>> {
    let mut z = g.clone();
    embed_in_place(&mut z, mode)?;
    Ok(z)
}

pub(crate) fn embed_in_place<T: Scalar>(g: &mut DenseMatrix<T>, mode: &WhiteningMode<T>) -> Result<()> {
    let n = g.cols();
    center_rows(g);
    match mode.kind {
        WhiteningKind::Diagonal => {
            diagonal_whiten_in_place(g, mode.epsilon);
        }
        WhiteningKind::Full => {
            *g = full_whiten(g, mode.epsilon)?;
        }
    }
    let offset = T::one() / T::of_usize(n);
    g.as_mut_slice().iter_mut().for_each(|v| *v += offset);
    Ok(())
}

/// Subtracts each row's own mean from that row.
pub fn center_rows<T: Scalar>(g: &mut DenseMatrix<T>) {
    let inv_n = T::one() / T::of_usize(g.cols());
    for i in 0..g.rows() {
        let row = g.row_mut(i);
        let mean = row.iter().copied().sum::<T>() * inv_n;
        row.iter_mut().for_each(|v| *v -= mean);
    }
}

/// Embeds every query of `q` against the key set `k`.
pub fn injective_embed<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    spec: &KernelSpec<T>,
    mode: &WhiteningMode<T>,
) -> Result<EmbeddingBatch<T>> {
    let g = similarity_vectors(q, k, spec)?;
    let z = embed_similarities(&g, mode)?;
    Ok(EmbeddingBatch { g, z, mode: *mode })
}

/// Centered key Gram matrix `P G Pᵀ` with `P = I − (1/N)·11ᵀ` and
/// `G_ij = k(k_i, k_j)`.
pub fn key_covariance<T: Scalar>(k: &DenseMatrix<T>, spec: &KernelSpec<T>) -> Result<DenseMatrix<T>> {
    let g = kernel_matrix(k, k, spec)?;
    let n = g.rows();
    let inv_n = T::one() / T::of_usize(n);
    let row_mean: Vec<T> = g.row_iter().map(|r| r.iter().copied().sum::<T>() * inv_n).collect();
    let col_mean: Vec<T> = (0..n).map(|j| (0..n).map(|i| g[(i, j)]).sum::<T>() * inv_n).collect();
    let total = row_mean.iter().copied().sum::<T>() * inv_n;
    let centered = DenseMatrix::from_fn(n, n, |i, j| g[(i, j)] - row_mean[i] - col_mean[j] + total);
    centered.symmetrized()
}
