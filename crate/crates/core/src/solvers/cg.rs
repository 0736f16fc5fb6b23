use crate::error::{Error, Result};
use crate::linalg::{matmul, DenseMatrix};
use crate::scalar::Scalar;

use super::SolverReport;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgConfig<T = f64> {
    /// Stop a column once `‖r‖₂ ≤ tol · ‖b‖₂`.
    pub tol: T,
    pub max_iter: usize,
}

impl Default for CgConfig<f64> {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1000,
        }
    }
}

/// Plain conjugate gradient for `A X = B`, each column of `B` solved
/// independently from a zero initial guess. Columns advance in lockstep and
/// drop out once converged.
pub fn conjugate_gradient<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    tol: T,
    max_iter: usize,
    reference: Option<&DenseMatrix<T>>,
) -> Result<SolverReport<T>> {
    if !a.is_square() || a.rows() != b.rows() {
        return Err(Error::shape("conjugate_gradient", a.shape(), b.shape()));
    }
    if let Some(r) = reference {
        if r.shape() != b.shape() {
            return Err(Error::shape("conjugate_gradient", b.shape(), r.shape()));
        }
    }
    let (n, k) = b.shape();
    let mut x = DenseMatrix::zeros(n, k);
    let mut r = b.clone();
    let mut p = b.clone();
    let col_sq = |m: &DenseMatrix<T>, c: usize| (0..n).map(|i| m[(i, c)] * m[(i, c)]).sum::<T>();

    let b_norm: Vec<T> = (0..k).map(|c| col_sq(b, c).sqrt()).collect();
    let b_total = b.frobenius_norm();
    let mut rs: Vec<T> = (0..k).map(|c| col_sq(&r, c)).collect();
    let mut active: Vec<bool> = (0..k).map(|c| rs[c].sqrt() > tol * b_norm[c]).collect();
    let ref_norm = reference.map(|m| m.frobenius_norm());

    let mut residual_trace = Vec::new();
    let mut iterates_error = Vec::new();
    let mut iter = 0;
    while iter < max_iter && active.iter().any(|&a| a) {
        iter += 1;
        let ap = matmul(a, &p)?;
        for c in 0..k {
            if !active[c] {
                continue;
            }
            let pap = (0..n).map(|i| p[(i, c)] * ap[(i, c)]).sum::<T>();
            if !(pap > T::zero()) {
                return Err(Error::NotSpd {
                    iteration: iter,
                    curvature: pap.as_f64(),
                });
            }
            let alpha = rs[c] / pap;
            for i in 0..n {
                x[(i, c)] += alpha * p[(i, c)];
                r[(i, c)] -= alpha * ap[(i, c)];
            }
            let rs_new = col_sq(&r, c);
            if rs_new.sqrt() <= tol * b_norm[c] {
                active[c] = false;
            } else {
                let beta = rs_new / rs[c];
                for i in 0..n {
                    p[(i, c)] = r[(i, c)] + beta * p[(i, c)];
                }
            }
            rs[c] = rs_new;
        }
        let rn = r.frobenius_norm();
        residual_trace.push(if b_total > T::zero() { rn / b_total } else { rn });
        if let (Some(xr), Some(xn)) = (reference, ref_norm) {
            let e = x.sub(xr)?.frobenius_norm();
            iterates_error.push(if xn > T::zero() { e / xn } else { e });
        }
    }

    Ok(SolverReport {
        iterates_error,
        iterations_used: residual_trace.len(),
        residual_trace,
        final_iterate: x,
        converged: !active.iter().any(|&a| a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system_in_one_step() {
        let b = DenseMatrix::from_rows(&[[1.0, -2.0], [3.0, 0.5], [0.0, 4.0]]).unwrap();
        let r = conjugate_gradient(&DenseMatrix::identity(3), &b, 1e-12, 10, None).unwrap();
        assert_eq!(r.iterations_used, 1);
        assert!(r.converged);
        assert_eq!(r.final_iterate, b);
    }

    #[test]
    fn two_distinct_eigenvalues_terminate_in_two() {
        let a = DenseMatrix::from_diag(&[1.0f64, 4.0]);
        let b = DenseMatrix::from_rows(&[[1.0], [4.0]]).unwrap();
        let r = conjugate_gradient(&a, &b, 1e-14, 10, None).unwrap();
        assert!(r.iterations_used <= 2);
        assert!((r.final_iterate[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((r.final_iterate[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_needs_no_iterations() {
        let r = conjugate_gradient(&DenseMatrix::identity(2), &DenseMatrix::zeros(2, 1), 1e-12, 10, None).unwrap();
        assert_eq!(r.iterations_used, 0);
        assert!(r.converged);
    }

    #[test]
    fn indefinite_matrix_breaks_down() {
        let a = DenseMatrix::from_diag(&[1.0, -1.0]);
        let b = DenseMatrix::from_rows(&[[1.0], [1.0]]).unwrap();
        assert!(matches!(
            conjugate_gradient(&a, &b, 1e-12, 10, None),
            Err(Error::NotSpd { .. })
        ));
    }
}
