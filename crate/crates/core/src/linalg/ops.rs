//! Products and norms.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::DenseMatrix;

const TILE_I: usize = 64;
const TILE_K: usize = 128;
const TILE_J: usize = 256;

/// Dense product `a · b`, tiled over (row, inner, column) blocks.
///
/// Within each output entry the inner index is accumulated in increasing
/// order, so results do not depend on the tile sizes' interaction with the
/// input shape beyond that fixed order.
pub fn matmul<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if a.cols() != b.rows() {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let (n, inner, m) = (a.rows(), a.cols(), b.cols());
    let mut out = DenseMatrix::zeros(n, m);
    let (ad, bd) = (a.as_slice(), b.as_slice());
    let od = out.as_mut_slice();

    for i0 in (0..n).step_by(TILE_I) {
        let i1 = (i0 + TILE_I).min(n);
        for k0 in (0..inner).step_by(TILE_K) {
            let k1 = (k0 + TILE_K).min(inner);
            for j0 in (0..m).step_by(TILE_J) {
                let j1 = (j0 + TILE_J).min(m);
                for i in i0..i1 {
                    let orow = &mut od[i * m + j0..i * m + j1];
                    for k in k0..k1 {
                        let aik = ad[i * inner + k];
                        if aik == T::zero() {
                            continue;
                        }
                        let brow = &bd[k * m + j0..k * m + j1];
                        for (o, &bv) in orow.iter_mut().zip(brow) {
                            *o += aik * bv;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `aᵀ · b` without materializing the transpose.
pub fn matmul_tn<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if a.rows() != b.rows() {
        return Err(Error::shape("matmul_tn", a.shape(), b.shape()));
    }
    let (n, p, m) = (a.rows(), a.cols(), b.cols());
    let mut out = DenseMatrix::zeros(p, m);
    let od = out.as_mut_slice();
    for r in 0..n {
        let arow = a.row(r);
        let brow = b.row(r);
        for (i, &ari) in arow.iter().enumerate() {
            if ari == T::zero() {
                continue;
            }
            for (o, &bv) in od[i * m..(i + 1) * m].iter_mut().zip(brow) {
                *o += ari * bv;
            }
        }
    }
    Ok(out)
}

pub fn matvec<T: Scalar>(a: &DenseMatrix<T>, x: &[T]) -> Result<Vec<T>> {
    if a.cols() != x.len() {
        return Err(Error::shape("matvec", a.shape(), (x.len(), 1)));
    }
    Ok(a.row_iter().map(|row| dot(row, x)).collect())
}

#[inline]
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

#[inline]
pub fn norm2<T: Scalar>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// Maximum absolute column sum.
    One,
    /// Maximum absolute row sum.
    Inf,
    Frobenius,
    /// Largest singular value.
    Spectral,
}

pub const SPECTRAL_TOL: f64 = 1e-8;
pub const SPECTRAL_MAX_ITER: usize = 1000;

pub fn norm<T: Scalar>(a: &DenseMatrix<T>, kind: NormKind) -> T {
    match kind {
        NormKind::One => (0..a.cols())
            .map(|j| (0..a.rows()).map(|i| a[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max),
        NormKind::Inf => a
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<T>())
            .fold(T::zero(), T::max),
        NormKind::Frobenius => a.frobenius_norm(),
        NormKind::Spectral => spectral_norm(a),
    }
}

/// Largest singular value by power iteration on `AᵀA`.
///
/// Stops once the eigen-residual `‖AᵀA v − θ v‖` drops below
/// `SPECTRAL_TOL · θ`, or after `SPECTRAL_MAX_ITER` steps.
pub fn spectral_norm<T: Scalar>(a: &DenseMatrix<T>) -> T {
    let n = a.cols();
    // Fixed, irregular start vector: deterministic and unlikely to be
    // orthogonal to the dominant right singular vector.
    let mut v: Vec<T> = (0..n)
        .map(|i| T::one() + T::of(((i * 7919 + 13) % 101) as f64 / 101.0))
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let tol = T::of(SPECTRAL_TOL);
    let mut theta = T::zero();
    for _ in 0..SPECTRAL_MAX_ITER {
        let av = a.row_iter().map(|r| dot(r, &v)).collect::<Vec<_>>();
        let mut w = vec![T::zero(); n];
        for (row, &s) in a.row_iter().zip(&av) {
            for (wj, &rj) in w.iter_mut().zip(row) {
                *wj += s * rj;
            }
        }
        theta = dot(&v, &w);
        let wn = norm2(&w);
        if wn == T::zero() {
            return T::zero();
        }
        let resid = w
            .iter()
            .zip(&v)
            .map(|(&wi, &vi)| (wi - theta * vi).powi(2))
            .sum::<T>()
            .sqrt();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = *wi / wn;
        }
        if resid <= tol * theta {
            break;
        }
    }
    theta.max(T::zero()).sqrt()
}
