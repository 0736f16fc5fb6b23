//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Used as the reference path for pseudoinverses, inverse square roots and
//! spectrum measurements; the production attention path never calls it.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{matmul, DenseMatrix};

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 100;

/// `A = V Λ Vᵀ` with eigenvalues ascending and eigenvectors as columns of `V`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition<T = f64> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: DenseMatrix<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    /// `V f(Λ) Vᵀ` for a spectral function `f`.
    pub fn apply_spectral(&self, f: impl Fn(T) -> T) -> DenseMatrix<T> {
        let v = &self.eigenvectors;
        let n = v.rows();
        let fl: Vec<T> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = T::zero();
                for (k, &f_k) in fl.iter().enumerate() {
                    s += v[(i, k)] * f_k * v[(j, k)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix<T> {
        self.apply_spectral(|l| l)
    }

    /// `max|λ| / min|λ|`; infinite for singular spectra.
    pub fn condition_number(&self) -> T {
        let (lo, hi) = self
            .eigenvalues
            .iter()
            .fold((T::infinity(), T::zero()), |(lo, hi), l| {
                (lo.min(l.abs()), hi.max(l.abs()))
            });
        hi / lo
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Sweeps stop once the largest off-diagonal magnitude is at most
/// `1e-12 · ‖a‖_F`.
pub fn sym_eig<T: Scalar>(a: &DenseMatrix<T>) -> Result<EigenDecomposition<T>> {
    if !a.is_square() {
        return Err(Error::shape("sym_eig", a.shape(), a.shape()));
    }
    let asym = a.asymmetry();
    if asym > T::of(SYMMETRY_TOL) {
        return Err(Error::contract(format!(
            "sym_eig requires a symmetric matrix (max |a_ij - a_ji| = {asym:e})"
        )));
    }
    let n = a.rows();
    let mut w = a.symmetrized()?;
    let mut v = DenseMatrix::identity(n);
    let threshold = T::of(1e-12) * a.frobenius_norm();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if max_off_diagonal(&w) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (w[(q, q)] - w[(p, p)]) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                rotate(&mut w, &mut v, p, q, c, s);
            }
        }
    }
    if !converged && max_off_diagonal(&w) > threshold {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].partial_cmp(&w[(j, j)]).expect("finite eigenvalues"));
    let eigenvalues = order.iter().map(|&i| w[(i, i)]).collect();
    let eigenvectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn max_off_diagonal<T: Scalar>(w: &DenseMatrix<T>) -> T {
    let n = w.rows();
    let mut m = T::zero();
    for p in 0..n {
        for q in (p + 1)..n {
            m = m.max(w[(p, q)].abs());
        }
    }
    m
}

/// `w ← Pᵀ w P`, `v ← v P` for the plane rotation in (p, q).
fn rotate<T: Scalar>(w: &mut DenseMatrix<T>, v: &mut DenseMatrix<T>, p: usize, q: usize, c: T, s: T) {
    let n = w.rows();
    for k in 0..n {
        let (akp, akq) = (w[(k, p)], w[(k, q)]);
        w[(k, p)] = c * akp - s * akq;
        w[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let (apk, aqk) = (w[(p, k)], w[(q, k)]);
        w[(p, k)] = c * apk - s * aqk;
        w[(q, k)] = s * apk + c * aqk;
    }
    w[(p, q)] = T::zero();
    w[(q, p)] = T::zero();
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Moore–Penrose pseudoinverse of a symmetric matrix through its
/// eigendecomposition. Eigenvalues with `|λ| ≤ rank_tol · max|λ|` are
/// treated as zero.
pub fn pinv_oracle<T: Scalar>(a: &DenseMatrix<T>, rank_tol: T) -> Result<DenseMatrix<T>> {
    let eig = sym_eig(a)?;
    let lmax = eig.eigenvalues.iter().fold(T::zero(), |m, l| m.max(l.abs()));
    let cut = rank_tol * lmax;
    Ok(eig.apply_spectral(|l| if l.abs() > cut { T::one() / l } else { T::zero() }))
}

/// Residuals of the four Penrose conditions, each relative to the
/// Frobenius norm of its reference side:
/// `A X A = A`, `X A X = X`, `(A X)ᵀ = A X`, `(X A)ᵀ = X A`.
pub fn penrose_residuals<T: Scalar>(a: &DenseMatrix<T>, x: &DenseMatrix<T>) -> Result<[T; 4]> {
    let ax = matmul(a, x)?;
    let xa = matmul(x, a)?;
    let axa = matmul(&ax, a)?;
    let xax = matmul(&xa, x)?;
    let rel = |m: &DenseMatrix<T>, r: &DenseMatrix<T>| m.relative_error(r);
    Ok([
        rel(&axa, a)?,
        rel(&xax, x)?,
        rel(&ax.transpose(), &ax)?,
        rel(&xa.transpose(), &xa)?,
    ])
}
