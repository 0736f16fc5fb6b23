//! Laplacian and Gaussian kernels over token rows: values, gradients and
//! the vector-Jacobian product of a full kernel matrix.

mod stats;

pub use stats::{distance_stats, DistanceMetric, DistanceStats, HistogramBin, DEFAULT_NUM_BINS};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Default Laplacian scale `λ`.
pub const DEFAULT_LAMBDA: f64 = 4.0;

/// Coordinates of `q_i − k_j` smaller than this contribute zero gradient in
/// [`kernel_matrix_vjp`] under the Laplacian kernel.
pub const KINK_TOL: f64 = 1e-12;

const ROW_TILE: usize = 32;
const COL_TILE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `exp(−‖x − y‖₁ / λ)`
    Laplacian,
    /// `exp(−‖x − y‖₂² / (2σ²))`
    Gaussian,
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Gaussian => "gaussian",
        })
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "laplacian" | "laplace" => Ok(KernelFamily::Laplacian),
            "gaussian" | "gauss" => Ok(KernelFamily::Gaussian),
            _ => Err(Error::Usage(format!(
                "unknown kernel family {s:?} (expected laplacian or gaussian)"
            ))),
        }
    }
}

/// Kernel family plus its positive scale (`λ` or `σ`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec<T = f64> {
    family: KernelFamily,
    scale: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(family: KernelFamily, scale: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::contract(format!("kernel scale must be > 0, got {scale}")));
        }
        Ok(Self { family, scale })
    }

    pub fn laplacian(lambda: T) -> Result<Self> {
        Self::new(KernelFamily::Laplacian, lambda)
    }

    pub fn gaussian(sigma: T) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma)
    }

    /// Gaussian kernel with `σ = √d`, the softmax-temperature analogue.
    pub fn gaussian_for_dim(d: usize) -> Self {
        Self {
            family: KernelFamily::Gaussian,
            scale: T::of_usize(d.max(1)).sqrt(),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// Kernel value from the already-accumulated distance (`‖t‖₁` for the
    /// Laplacian, `‖t‖₂²` for the Gaussian).
    #[inline]
    fn from_distance(&self, dist: T) -> T {
        match self.family {
            KernelFamily::Laplacian => (-dist / self.scale).exp(),
            KernelFamily::Gaussian => (-dist / (T::of(2.0) * self.scale * self.scale)).exp(),
        }
    }

    #[inline]
    fn distance(&self, x: &[T], y: &[T]) -> T {
        match self.family {
            KernelFamily::Laplacian => x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs()),
            KernelFamily::Gaussian => x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| {
                let t = a - b;
                acc + t * t
            }),
        }
    }
}

impl Default for KernelSpec<f64> {
    fn default() -> Self {
        Self {
            family: KernelFamily::Laplacian,
            scale: DEFAULT_LAMBDA,
        }
    }
}

pub fn kernel_scalar<T: Scalar>(x: &[T], y: &[T], spec: &KernelSpec<T>) -> Result<T> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::shape("kernel_scalar", (1, x.len()), (1, y.len())));
    }
    Ok(spec.from_distance(spec.distance(x, y)))
}

/// `G[i, j] = k(q_i, k_j)`.
///
/// Distance accumulation and exponentiation are fused per tile; no
/// intermediate beyond the output is allocated.
pub fn kernel_matrix<T: Scalar>(q: &DenseMatrix<T>, k: &DenseMatrix<T>, spec: &KernelSpec<T>) -> Result<DenseMatrix<T>> {
    let mut out = DenseMatrix::zeros(q.rows(), k.rows());
    kernel_matrix_into(q, k, spec, &mut out)?;
    Ok(out)
}

pub(crate) fn kernel_matrix_into<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    spec: &KernelSpec<T>,
    out: &mut DenseMatrix<T>,
) -> Result<()> {
    if q.cols() != k.cols() {
        return Err(Error::shape("kernel_matrix", q.shape(), k.shape()));
    }
    debug_assert_eq!(out.shape(), (q.rows(), k.rows()));
    let (n, m) = (q.rows(), k.rows());
    for i0 in (0..n).step_by(ROW_TILE) {
        let i1 = (i0 + ROW_TILE).min(n);
        for j0 in (0..m).step_by(COL_TILE) {
            let j1 = (j0 + COL_TILE).min(m);
            for i in i0..i1 {
                let qi = q.row(i);
                let orow = out.row_mut(i);
                for j in j0..j1 {
                    orow[j] = spec.from_distance(spec.distance(qi, k.row(j)));
                }
            }
        }
    }
    Ok(())
}

/// True when the Laplacian gradient exists at `(x, y)`, i.e. no coordinate
/// of `x − y` is exactly zero. Always true for the Gaussian kernel.
pub fn is_differentiable<T: Scalar>(x: &[T], y: &[T], spec: &KernelSpec<T>) -> bool {
    match spec.family {
        KernelFamily::Gaussian => true,
        KernelFamily::Laplacian => x.iter().zip(y).all(|(a, b)| a != b),
    }
}

/// `∇ₓ k(x, y)`.
///
/// Laplacian: `−(1/λ) sign(t) exp(−‖t‖₁/λ)`; Gaussian: `−(t/σ²) exp(−‖t‖₂²/(2σ²))`,
/// with `t = x − y`. A Laplacian coordinate with `t_i == 0` is a kink and is
/// reported as [`Error::Kink`].
pub fn kernel_grad<T: Scalar>(x: &[T], y: &[T], spec: &KernelSpec<T>) -> Result<Vec<T>> {
    let value = kernel_scalar(x, y, spec)?;
    match spec.family {
        KernelFamily::Laplacian => {
            if let Some(coordinate) = x.iter().zip(y).position(|(a, b)| a == b) {
                return Err(Error::Kink { coordinate });
            }
            let c = -value / spec.scale;
            Ok(x.iter().zip(y).map(|(&a, &b)| c * (a - b).signum()).collect())
        }
        KernelFamily::Gaussian => {
            let c = -value / (spec.scale * spec.scale);
            Ok(x.iter().zip(y).map(|(&a, &b)| c * (a - b)).collect())
        }
    }
}

/// Backward pass of [`kernel_matrix`]: given the cotangent `upstream` of
/// `G = kernel_matrix(q, k)`, returns `(∂L/∂q, ∂L/∂k)`.
///
/// Laplacian coordinates with `|q_i − k_j| < KINK_TOL` use the zero
/// subgradient, so this path is total.
pub fn kernel_matrix_vjp<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    spec: &KernelSpec<T>,
    upstream: &DenseMatrix<T>,
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    if q.cols() != k.cols() {
        return Err(Error::shape("kernel_matrix_vjp", q.shape(), k.shape()));
    }
    if upstream.shape() != (q.rows(), k.rows()) {
        return Err(Error::shape("kernel_matrix_vjp", (q.rows(), k.rows()), upstream.shape()));
    }
    let d = q.cols();
    let mut dq = DenseMatrix::zeros(q.rows(), d);
    let mut dk = DenseMatrix::zeros(k.rows(), d);
    let kink = T::of(KINK_TOL);

    for i in 0..q.rows() {
        let qi = q.row(i);
        for j in 0..k.rows() {
            let u = upstream[(i, j)];
            if u == T::zero() {
                continue;
            }
            let kj = k.row(j);
            let g = spec.from_distance(spec.distance(qi, kj));
            match spec.family {
                KernelFamily::Laplacian => {
                    let c = -u * g / spec.scale;
                    for c_idx in 0..d {
                        let t = qi[c_idx] - kj[c_idx];
                        if t.abs() < kink {
                            continue;
                        }
                        let gq = c * t.signum();
                        dq[(i, c_idx)] += gq;
                        dk[(j, c_idx)] -= gq;
                    }
                }
                KernelFamily::Gaussian => {
                    let c = -u * g / (spec.scale * spec.scale);
                    for c_idx in 0..d {
                        let gq = c * (qi[c_idx] - kj[c_idx]);
                        dq[(i, c_idx)] += gq;
                        dk[(j, c_idx)] -= gq;
                    }
                }
            }
        }
    }
    Ok((dq, dk))
}
