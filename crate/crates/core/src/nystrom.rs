//! Pooling-based landmarks and the Nyström reconstruction `Ĝ = C W† Cᵀ`.

use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, KernelSpec};
use crate::linalg::{matmul, matmul_tn, pinv_oracle, DenseMatrix};
use crate::scalar::Scalar;
use crate::solvers::{newton_schulz, NsConfig, SolverReport};

/// Token grid `height × width` pooled in `ratio × ratio` blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolGeometry {
    height: usize,
    width: usize,
    ratio: usize,
}

impl PoolGeometry {
    /// The ratio must divide both grid sides; ragged blocks are rejected
    /// rather than padded.
    pub fn new(height: usize, width: usize, ratio: usize) -> Result<Self> {
        if height == 0 || width == 0 || ratio == 0 {
            return Err(Error::contract(format!(
                "pool geometry needs positive sides and ratio, got {height}x{width} / {ratio}"
            )));
        }
        if height % ratio != 0 || width % ratio != 0 {
            return Err(Error::contract(format!(
                "pooling ratio {ratio} does not divide the {height}x{width} token grid"
            )));
        }
        Ok(Self { height, width, ratio })
    }

    /// Square grid for `n` tokens with the largest divisor ratio giving
    /// roughly `√n` landmarks.
    pub fn square_auto(n: usize) -> Result<Self> {
        let side = (n as f64).sqrt().round() as usize;
        if side * side != n {
            return Err(Error::contract(format!("{n} tokens do not form a square grid")));
        }
        let target = (side as f64).sqrt();
        let ratio = (1..=side)
            .filter(|r| side % r == 0)
            .min_by(|a, b| {
                let da = (*a as f64 - target).abs();
                let db = (*b as f64 - target).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap_or(1);
        Self::new(side, side, ratio)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn n_tokens(&self) -> usize {
        self.height * self.width
    }

    pub fn n_landmarks(&self) -> usize {
        (self.height / self.ratio) * (self.width / self.ratio)
    }

    pub fn check_tokens(&self, n: usize) -> Result<()> {
        if n != self.n_tokens() {
            return Err(Error::contract(format!(
                "{n} tokens do not fill the {}x{} grid",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LandmarkSet<T = f64> {
    pub q_landmarks: DenseMatrix<T>,
    pub k_landmarks: DenseMatrix<T>,
    pub geometry: PoolGeometry,
}

/// Average-pools tokens laid out row-major on the grid: token `t` sits at
/// `(t / width, t % width)` and landmark `(a, b)` is the mean of block rows
/// `[a·r, a·r + r)` and block columns `[b·r, b·r + r)`.
pub fn pool_landmarks<T: Scalar>(tokens: &DenseMatrix<T>, geom: &PoolGeometry) -> Result<DenseMatrix<T>> {
    geom.check_tokens(tokens.rows())?;
    let (r, w) = (geom.ratio, geom.width);
    let (lh, lw) = (geom.height / r, w / r);
    let d = tokens.cols();
    let inv = T::one() / T::of_usize(r * r);
    let mut out = DenseMatrix::zeros(lh * lw, d);
    for a in 0..lh {
        for b in 0..lw {
            let dst = out.row_mut(a * lw + b);
            for y in a * r..(a + 1) * r {
                for x in b * r..(b + 1) * r {
                    for (o, &v) in dst.iter_mut().zip(tokens.row(y * w + x)) {
                        *o += v;
                    }
                }
            }
            dst.iter_mut().for_each(|v| *v *= inv);
        }
    }
    Ok(out)
}

pub fn select_landmarks<T: Scalar>(q: &DenseMatrix<T>, k: &DenseMatrix<T>, geom: &PoolGeometry) -> Result<LandmarkSet<T>> {
    Ok(LandmarkSet {
        q_landmarks: pool_landmarks(q, geom)?,
        k_landmarks: pool_landmarks(k, geom)?,
        geometry: *geom,
    })
}

/// How `W†` is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PinvMethod<T = f64> {
    /// Newton–Schulz iteration on `W + εI`.
    NewtonSchulz(NsConfig<T>),
    /// Eigendecomposition with relative rank cut-off; no perturbation.
    Oracle { rank_tol: T },
}

impl Default for PinvMethod<f64> {
    fn default() -> Self {
        PinvMethod::NewtonSchulz(NsConfig::default())
    }
}

/// `C` (N×m), symmetrized `W` (m×m) and `W†`.
#[derive(Clone, Debug)]
pub struct NystromFactors<T = f64> {
    pub c: DenseMatrix<T>,
    pub w: DenseMatrix<T>,
    pub w_pinv: DenseMatrix<T>,
    pub report: Option<SolverReport<T>>,
}

/// Landmark-kernel matrix `W_ℓℓ' = k(k̃_ℓ, q̃_ℓ')`, symmetrized as
/// `(W + Wᵀ)/2` so it is a valid Newton–Schulz input even when `Q ≠ K`.
pub fn landmark_kernel<T: Scalar>(landmarks: &LandmarkSet<T>, spec: &KernelSpec<T>) -> Result<DenseMatrix<T>> {
    kernel_matrix(&landmarks.k_landmarks, &landmarks.q_landmarks, spec)?.symmetrized()
}

pub fn landmark_pinv<T: Scalar>(w: &DenseMatrix<T>, solver: &PinvMethod<T>) -> Result<(DenseMatrix<T>, Option<SolverReport<T>>)> {
    match solver {
        PinvMethod::NewtonSchulz(cfg) => {
            let report = newton_schulz(w, cfg, None)?;
            Ok((report.final_iterate.clone(), Some(report)))
        }
        PinvMethod::Oracle { rank_tol } => Ok((pinv_oracle(w, *rank_tol)?, None)),
    }
}

pub fn nystrom_factors<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    geom: &PoolGeometry,
    spec: &KernelSpec<T>,
    solver: &PinvMethod<T>,
) -> Result<NystromFactors<T>> {
    if q.shape() != k.shape() {
        return Err(Error::shape("nystrom", q.shape(), k.shape()));
    }
    let landmarks = select_landmarks(q, k, geom)?;
    let c = kernel_matrix(q, &landmarks.k_landmarks, spec)?;
    let w = landmark_kernel(&landmarks, spec)?;
    let (w_pinv, report) = landmark_pinv(&w, solver)?;
    Ok(NystromFactors { c, w, w_pinv, report })
}

/// Rank-`m` reconstruction `Ĝ = (C W†) Cᵀ` of the `N × N` kernel matrix.
pub fn nystrom_kernel<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    geom: &PoolGeometry,
    spec: &KernelSpec<T>,
    solver: &PinvMethod<T>,
) -> Result<DenseMatrix<T>> {
    let f = nystrom_factors(q, k, geom, spec, solver)?;
    let cw = matmul(&f.c, &f.w_pinv)?;
    matmul(&cw, &f.c.transpose())
}

/// `C (W† (Cᵀ V))`, evaluated right to left in `O(N·m·d_v)` without an
/// `N × N` intermediate.
pub fn low_rank_apply<T: Scalar>(c: &DenseMatrix<T>, w_pinv: &DenseMatrix<T>, v: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if c.rows() != v.rows() {
        return Err(Error::shape("low_rank_apply", c.shape(), v.shape()));
    }
    if w_pinv.shape() != (c.cols(), c.cols()) {
        return Err(Error::shape("low_rank_apply", c.shape(), w_pinv.shape()));
    }
    let ctv = matmul_tn(c, v)?;
    let y = matmul(w_pinv, &ctv)?;
    matmul(c, &y)
}
