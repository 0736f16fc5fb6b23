use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{rng_from_seed, DenseMatrix};

/// Seeded token cloud: a few Gaussian clusters plus one heavy-tailed
/// component whose radius is log-normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TokenSpec {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub clusters: usize,
    pub cluster_std: f64,
    /// Share of tokens drawn from the heavy-tailed component.
    pub heavy_fraction: f64,
    /// `σ` of the log-normal radius.
    pub heavy_sigma: f64,
}

impl TokenSpec {
    pub fn new(n: usize, dim: usize, seed: u64) -> Self {
        Self {
            n,
            dim,
            seed,
            clusters: 4,
            cluster_std: 0.5,
            heavy_fraction: 0.25,
            heavy_sigma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dim == 0 || self.clusters == 0 {
            return Err(Error::Usage("token spec needs n, dim and clusters >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.heavy_fraction) {
            return Err(Error::Usage("heavy_fraction must lie in [0, 1]".into()));
        }
        if !(self.cluster_std > 0.0) || !(self.heavy_sigma > 0.0) {
            return Err(Error::Usage("cluster_std and heavy_sigma must be > 0".into()));
        }
        Ok(())
    }
}

/// Token `i` is heavy-tailed when a uniform draw falls below
/// `heavy_fraction`; otherwise it belongs to a uniformly chosen cluster.
pub fn synthetic_tokens(spec: &TokenSpec) -> Result<DenseMatrix<f64>> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let centres: Vec<Vec<f64>> = (0..spec.clusters)
        .map(|_| (0..spec.dim).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let radius = LogNormal::new(0.0, spec.heavy_sigma).map_err(|e| Error::Usage(e.to_string()))?;
    let scale = (spec.dim as f64).sqrt();

    let mut data = Vec::with_capacity(spec.n * spec.dim);
    for _ in 0..spec.n {
        if rng.random::<f64>() < spec.heavy_fraction {
            let dir: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r = radius.sample(&mut rng) * scale;
            data.extend(dir.iter().map(|x| x / norm * r));
        } else {
            let c = &centres[rng.random_range(0..spec.clusters)];
            data.extend(c.iter().map(|&m| m + spec.cluster_std * rng.sample::<f64, _>(StandardNormal)));
        }
    }
    DenseMatrix::from_vec(spec.n, spec.dim, data)
}

/// Queries, keys and values drawn from one stream: `q` from `spec.seed`,
/// `k` and `v` from the next two seeds.
pub fn synthetic_qkv(spec: &TokenSpec, value_dim: usize) -> Result<[DenseMatrix<f64>; 3]> {
    let q = synthetic_tokens(spec)?;
    let k = synthetic_tokens(&TokenSpec {
        seed: spec.seed.wrapping_add(1),
        ..*spec
    })?;
    let v = synthetic_tokens(&TokenSpec {
        seed: spec.seed.wrapping_add(2),
        dim: value_dim,
        ..*spec
    })?;
    Ok([q, k, v])
}
