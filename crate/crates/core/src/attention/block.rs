use crate::error::{Error, Result};
use crate::feature_map::{embed_in_place, WhiteningMode, DEFAULT_EPSILON};
use crate::kernels::{kernel_matrix, KernelSpec, DEFAULT_LAMBDA};
use crate::linalg::{matmul, matmul_tn, DenseMatrix};
use crate::nystrom::{landmark_kernel, select_landmarks, PoolGeometry};
use crate::scalar::Scalar;
use crate::solvers::{newton_schulz, NsConfig, SolverReport};

use super::dwc::{dwc_accumulate, DwcLayout, DwcWeights, DEFAULT_DWC_WIDTH};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttentionConfig<T = f64> {
    pub n_tokens: usize,
    pub head_dim: usize,
    pub value_dim: usize,
    pub kernel: KernelSpec<T>,
    pub whitening: WhiteningMode<T>,
    pub geometry: PoolGeometry,
    pub ns: NsConfig<T>,
    pub dwc_width: usize,
}

impl<T: Scalar> AttentionConfig<T> {
    /// Laplacian kernel with the default scale, diagonal whitening, default
    /// Newton–Schulz settings and width-3 depthwise convolution.
    pub fn new(head_dim: usize, value_dim: usize, geometry: PoolGeometry) -> Result<Self> {
        let cfg = Self {
            n_tokens: geometry.n_tokens(),
            head_dim,
            value_dim,
            kernel: KernelSpec::laplacian(T::of(DEFAULT_LAMBDA))?,
            whitening: WhiteningMode::diagonal(T::of(DEFAULT_EPSILON))?,
            geometry,
            ns: NsConfig::default_for(),
            dwc_width: DEFAULT_DWC_WIDTH,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_kernel(mut self, kernel: KernelSpec<T>) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_whitening(mut self, whitening: WhiteningMode<T>) -> Self {
        self.whitening = whitening;
        self
    }

    pub fn with_ns(mut self, ns: NsConfig<T>) -> Self {
        self.ns = ns;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.check_tokens(self.n_tokens)?;
        if self.dwc_width % 2 == 0 {
            return Err(Error::contract(format!("dwc_width must be odd, got {}", self.dwc_width)));
        }
        if self.head_dim == 0 || self.value_dim == 0 {
            return Err(Error::contract("head and value dimensions must be positive"));
        }
        self.ns.validate()
    }

    pub fn n_landmarks(&self) -> usize {
        self.geometry.n_landmarks()
    }

    fn check_inputs(&self, q: &DenseMatrix<T>, k: &DenseMatrix<T>, v: Option<&DenseMatrix<T>>) -> Result<()> {
        self.validate()?;
        let qk = (self.n_tokens, self.head_dim);
        if q.shape() != qk {
            return Err(Error::shape("attention query", qk, q.shape()));
        }
        if k.shape() != qk {
            return Err(Error::shape("attention key", qk, k.shape()));
        }
        if let Some(v) = v {
            let vs = (self.n_tokens, self.value_dim);
            if v.shape() != vs {
                return Err(Error::shape("attention value", vs, v.shape()));
            }
        }
        Ok(())
    }

    fn dwc_geometry(&self, weights: &DwcWeights<T>) -> Result<Option<&PoolGeometry>> {
        if weights.width() != self.dwc_width {
            return Err(Error::contract(format!(
                "depthwise weights have width {}, config expects {}",
                weights.width(),
                self.dwc_width
            )));
        }
        Ok(match weights.layout() {
            DwcLayout::Grid => Some(&self.geometry),
            DwcLayout::Line => None,
        })
    }
}

/// Which evaluation strategy the block uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AttentionPath {
    /// Dense when every token is its own landmark, landmark path otherwise.
    #[default]
    Auto,
    /// Full `N × N` similarity matrix.
    Dense,
    /// `N × m` landmark similarities with the Nyström factorization.
    Landmark,
}

/// `Z V + DWC(V)` with the path chosen automatically.
pub fn laplacianformer_attention<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    v: &DenseMatrix<T>,
    cfg: &AttentionConfig<T>,
    weights: &DwcWeights<T>,
) -> Result<DenseMatrix<T>> {
    laplacianformer_attention_with(q, k, v, cfg, weights, AttentionPath::Auto)
}

/// Dense path: `Z = embed(G)` with `G = k(Q, K)` of size `N × N`.
///
/// Landmark path: `Z̃ = embed(C)` with `C = k(Q, K̃)` of size `N × m`, and
/// the output `Z̃ (W† (Cᵀ V))`. `Cᵀ V` is taken before `C` is embedded in
/// place, so only one `N × m` buffer and the `N × d_v` output are live.
pub fn laplacianformer_attention_with<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    v: &DenseMatrix<T>,
    cfg: &AttentionConfig<T>,
    weights: &DwcWeights<T>,
    path: AttentionPath,
) -> Result<DenseMatrix<T>> {
    cfg.check_inputs(q, k, Some(v))?;
    let dwc_geom = cfg.dwc_geometry(weights)?;
    let dense = match path {
        AttentionPath::Auto => cfg.n_landmarks() == cfg.n_tokens,
        AttentionPath::Dense => true,
        AttentionPath::Landmark => false,
    };

    let mut out = if dense {
        let mut z = kernel_matrix(q, k, &cfg.kernel)?;
        embed_in_place(&mut z, &cfg.whitening)?;
        matmul(&z, v)?
    } else {
        let landmarks = select_landmarks(q, k, &cfg.geometry)?;
        let mut c = kernel_matrix(q, &landmarks.k_landmarks, &cfg.kernel)?;
        let ctv = matmul_tn(&c, v)?;
        let w = landmark_kernel(&landmarks, &cfg.kernel)?;
        let w_pinv = newton_schulz(&w, &cfg.ns, None)?.final_iterate;
        let y = matmul(&w_pinv, &ctv)?;
        drop(ctv);
        embed_in_place(&mut c, &cfg.whitening)?;
        matmul(&c, &y)?
    };
    dwc_accumulate(v, weights, dwc_geom, &mut out)?;
    Ok(out)
}

/// The embedding the block multiplies into: `N × N` on the dense path,
/// `N × m` (whitened landmark similarities) otherwise.
pub fn attention_embedding<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    cfg: &AttentionConfig<T>,
    path: AttentionPath,
) -> Result<DenseMatrix<T>> {
    cfg.check_inputs(q, k, None)?;
    let dense = match path {
        AttentionPath::Auto => cfg.n_landmarks() == cfg.n_tokens,
        AttentionPath::Dense => true,
        AttentionPath::Landmark => false,
    };
    let mut z = if dense {
        kernel_matrix(q, k, &cfg.kernel)?
    } else {
        let landmarks = select_landmarks(q, k, &cfg.geometry)?;
        kernel_matrix(q, &landmarks.k_landmarks, &cfg.kernel)?
    };
    embed_in_place(&mut z, &cfg.whitening)?;
    Ok(z)
}

/// Every factor of the landmark path, kept for inspection.
#[derive(Clone, Debug)]
pub struct LandmarkFactors<T = f64> {
    /// Raw landmark similarities `C`, `N × m`.
    pub c: DenseMatrix<T>,
    /// Embedded similarities `Z̃`, `N × m`.
    pub z: DenseMatrix<T>,
    pub w: DenseMatrix<T>,
    pub w_pinv: DenseMatrix<T>,
    pub report: SolverReport<T>,
}

pub fn landmark_factors<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    cfg: &AttentionConfig<T>,
) -> Result<LandmarkFactors<T>> {
    cfg.check_inputs(q, k, None)?;
    let landmarks = select_landmarks(q, k, &cfg.geometry)?;
    let c = kernel_matrix(q, &landmarks.k_landmarks, &cfg.kernel)?;
    let mut z = c.clone();
    embed_in_place(&mut z, &cfg.whitening)?;
    let w = landmark_kernel(&landmarks, &cfg.kernel)?;
    let report = newton_schulz(&w, &cfg.ns, None)?;
    Ok(LandmarkFactors {
        c,
        z,
        w,
        w_pinv: report.final_iterate.clone(),
        report,
    })
}
