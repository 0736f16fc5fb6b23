use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::scalar::Scalar;

fn check_qkv<T: Scalar>(q: &DenseMatrix<T>, k: &DenseMatrix<T>, v: &DenseMatrix<T>, op: &'static str) -> Result<()> {
    if q.cols() != k.cols() {
        return Err(Error::shape(op, q.shape(), k.shape()));
    }
    if k.rows() != v.rows() {
        return Err(Error::shape(op, k.shape(), v.shape()));
    }
    Ok(())
}

/// Writes the stabilized softmax of `q_i · k_j / √d` over `j` into `w`.
fn softmax_row<T: Scalar>(qi: &[T], k: &DenseMatrix<T>, inv_sqrt_d: T, w: &mut [T]) {
    let mut max = T::neg_infinity();
    for (wj, kj) in w.iter_mut().zip(k.row_iter()) {
        *wj = dot(qi, kj) * inv_sqrt_d;
        max = max.max(*wj);
    }
    let mut sum = T::zero();
    for wj in w.iter_mut() {
        *wj = (*wj - max).exp();
        sum += *wj;
    }
    let inv = T::one() / sum;
    w.iter_mut().for_each(|wj| *wj *= inv);
}

/// `softmax(Q Kᵀ / √d) V`, one query row at a time; only a length-`N`
/// weight buffer is live.
pub fn softmax_attention<T: Scalar>(q: &DenseMatrix<T>, k: &DenseMatrix<T>, v: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    check_qkv(q, k, v, "softmax_attention")?;
    let inv_sqrt_d = T::one() / T::of_usize(q.cols()).sqrt();
    let mut w = vec![T::zero(); k.rows()];
    let mut out = DenseMatrix::zeros(q.rows(), v.cols());
    for i in 0..q.rows() {
        softmax_row(q.row(i), k, inv_sqrt_d, &mut w);
        let oi = out.row_mut(i);
        for (&wj, vj) in w.iter().zip(v.row_iter()) {
            for (o, &x) in oi.iter_mut().zip(vj) {
                *o += wj * x;
            }
        }
    }
    Ok(out)
}

/// The full row-stochastic attention matrix (`N_q × N_k`).
pub fn softmax_weights<T: Scalar>(q: &DenseMatrix<T>, k: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if q.cols() != k.cols() {
        return Err(Error::shape("softmax_weights", q.shape(), k.shape()));
    }
    let inv_sqrt_d = T::one() / T::of_usize(q.cols()).sqrt();
    let mut out = DenseMatrix::zeros(q.rows(), k.rows());
    for i in 0..q.rows() {
        softmax_row(q.row(i), k, inv_sqrt_d, out.row_mut(i));
    }
    Ok(out)
}
