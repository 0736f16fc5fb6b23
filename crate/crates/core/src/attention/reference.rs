use crate::error::{Error, Result};
use crate::feature_map::{embed_similarities, WhiteningMode};
use crate::kernels::{kernel_scalar, KernelSpec};
use crate::linalg::{matmul, DenseMatrix};
use crate::nystrom::PoolGeometry;
use crate::scalar::Scalar;

use super::block::LandmarkFactors;
use super::dwc::{dwc, DwcLayout, DwcWeights};

/// Straight-line evaluation of `Z V + DWC(V)`: every kernel entry from
/// [`kernel_scalar`], the full `N × N` embedding, and the product as a
/// plain triple loop.
pub fn dense_reference_attention<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    v: &DenseMatrix<T>,
    kernel: &KernelSpec<T>,
    whitening: &WhiteningMode<T>,
    weights: &DwcWeights<T>,
    geometry: &PoolGeometry,
) -> Result<DenseMatrix<T>> {
    if k.rows() != v.rows() {
        return Err(Error::shape("dense_reference_attention", k.shape(), v.shape()));
    }
    let (n, nk) = (q.rows(), k.rows());
    let mut g = DenseMatrix::zeros(n, nk);
    for i in 0..n {
        for j in 0..nk {
            g[(i, j)] = kernel_scalar(q.row(i), k.row(j), kernel)?;
        }
    }
    let z = embed_similarities(&g, whitening)?;
    let mut out = DenseMatrix::zeros(n, v.cols());
    for i in 0..n {
        for c in 0..v.cols() {
            let mut acc = T::zero();
            for j in 0..nk {
                acc += z[(i, j)] * v[(j, c)];
            }
            out[(i, c)] = acc;
        }
    }
    let local = dwc(v, weights, (weights.layout() == DwcLayout::Grid).then_some(geometry))?;
    out.add(&local)
}

/// `((Z̃ W†) Cᵀ) V + DWC(V)` with the `N × N` operator formed explicitly.
pub fn materialized_landmark_attention<T: Scalar>(
    factors: &LandmarkFactors<T>,
    v: &DenseMatrix<T>,
    weights: &DwcWeights<T>,
    geometry: &PoolGeometry,
) -> Result<DenseMatrix<T>> {
    let zw = matmul(&factors.z, &factors.w_pinv)?;
    let operator = matmul(&zw, &factors.c.transpose())?;
    let out = matmul(&operator, v)?;
    let local = dwc(v, weights, (weights.layout() == DwcLayout::Grid).then_some(geometry))?;
    out.add(&local)
}
