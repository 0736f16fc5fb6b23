use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Row feature map `φ: ℝ^d → ℝ^f` with a fixed output dimension.
pub trait FeatureMap<T> {
    fn map_row(&self, x: &[T]) -> Vec<T>;
}

impl<T, F: Fn(&[T]) -> Vec<T>> FeatureMap<T> for F {
    fn map_row(&self, x: &[T]) -> Vec<T> {
        self(x)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Identity;

/// Elementwise `exp`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Exp;

/// Elementwise `elu(x) + 1`, strictly positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EluPlusOne;

impl<T: Scalar> FeatureMap<T> for Identity {
    fn map_row(&self, x: &[T]) -> Vec<T> {
        x.to_vec()
    }
}

impl<T: Scalar> FeatureMap<T> for Exp {
    fn map_row(&self, x: &[T]) -> Vec<T> {
        x.iter().map(|v| v.exp()).collect()
    }
}

impl<T: Scalar> FeatureMap<T> for EluPlusOne {
    fn map_row(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .map(|&v| if v > T::zero() { v + T::one() } else { v.exp() })
            .collect()
    }
}

/// Applies `φ` to every row.
pub fn map_rows<T: Scalar>(x: &DenseMatrix<T>, feature: &impl FeatureMap<T>) -> Result<DenseMatrix<T>> {
    let mut data = Vec::new();
    let mut f = None;
    for row in x.row_iter() {
        let phi = feature.map_row(row);
        match f {
            None => f = Some(phi.len()),
            Some(len) if len != phi.len() => {
                return Err(Error::contract(format!(
                    "feature map produced rows of length {len} and {}",
                    phi.len()
                )))
            }
            _ => {}
        }
        data.extend(phi);
    }
    DenseMatrix::from_vec(x.rows(), f.unwrap_or(0), data)
}

/// Kernelized attention
/// `out_i = φ(q_i)ᵀ (Σ_j φ(k_j) v_jᵀ) / φ(q_i)ᵀ (Σ_j φ(k_j))`.
///
/// The `f × d_v` key–value summary and the normalizer are formed once, so
/// the cost is linear in the number of tokens.
pub fn linear_attention<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    v: &DenseMatrix<T>,
    feature: &impl FeatureMap<T>,
) -> Result<DenseMatrix<T>> {
    if q.cols() != k.cols() {
        return Err(Error::shape("linear_attention", q.shape(), k.shape()));
    }
    if k.rows() != v.rows() {
        return Err(Error::shape("linear_attention", k.shape(), v.shape()));
    }
    let dv = v.cols();
    let mut kv: Vec<T> = Vec::new();
    let mut ksum: Vec<T> = Vec::new();
    for (kj, vj) in k.row_iter().zip(v.row_iter()) {
        let phi = feature.map_row(kj);
        if ksum.is_empty() {
            ksum = vec![T::zero(); phi.len()];
            kv = vec![T::zero(); phi.len() * dv];
        } else if phi.len() != ksum.len() {
            return Err(Error::contract("feature map output length varies between rows"));
        }
        for (a, &p) in phi.iter().enumerate() {
            ksum[a] += p;
            for (o, &x) in kv[a * dv..(a + 1) * dv].iter_mut().zip(vj) {
                *o += p * x;
            }
        }
    }

    let mut out = DenseMatrix::zeros(q.rows(), dv);
    for i in 0..q.rows() {
        let phi = feature.map_row(q.row(i));
        if phi.len() != ksum.len() {
            return Err(Error::contract("feature map output length differs between queries and keys"));
        }
        let den: T = phi.iter().zip(&ksum).map(|(&a, &b)| a * b).sum();
        if den == T::zero() || !den.is_finite() {
            return Err(Error::Degenerate { row: i });
        }
        let oi = out.row_mut(i);
        for (a, &p) in phi.iter().enumerate() {
            for (o, &x) in oi.iter_mut().zip(&kv[a * dv..(a + 1) * dv]) {
                *o += p * x;
            }
        }
        let inv = T::one() / den;
        oi.iter_mut().for_each(|o| *o *= inv);
    }
    Ok(out)
}
