use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::attention::{attention_embedding, mean_entropy, near_zero_fraction, AttentionConfig, AttentionPath};
use crate::error::{Error, Result};
use crate::feature_map::WhiteningMode;
use crate::kernels::{distance_stats, kernel_matrix, DistanceMetric, KernelSpec};
use crate::linalg::{load_matrix, DenseMatrix};
use crate::nystrom::{nystrom_kernel, select_landmarks, PinvMethod, PoolGeometry};
use crate::solvers::{convergence_experiment, CgConfig, ExperimentTable, NsConfig};

use super::manifest::{join, RunManifest};
use super::synthetic::{synthetic_qkv, synthetic_tokens, TokenSpec};

/// Threshold below which an embedding entry counts as near zero.
pub const SPARSITY_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceParams {
    pub sizes: Vec<usize>,
    pub kappas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub ns: NsConfig<f64>,
    pub cg: CgConfig<f64>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceOutput {
    pub table: ExperimentTable,
    pub manifest: RunManifest,
    pub files: Vec<PathBuf>,
}

pub fn convergence_csv_name(kappa: f64) -> String {
    format!("convergence_kappa_{kappa}.csv")
}

/// Runs the solver comparison and writes one CSV per condition number plus
/// `convergence_manifest.json`.
pub fn run_convergence_study(params: &ConvergenceParams, out_dir: &Path) -> Result<ConvergenceOutput> {
    if params.kappas.is_empty() {
        return Err(Error::Usage("convergence study needs at least one kappa".into()));
    }
    let table = convergence_experiment(&params.sizes, &params.kappas, &params.seeds, &params.ns, &params.cg)?;
    let config = format!(
        "convergence;sizes={};kappas={};seeds={};ns={:?};cg={:?}",
        join(&params.sizes),
        join(&params.kappas),
        join(&params.seeds),
        params.ns,
        params.cg
    );
    let mut manifest = RunManifest::new(params.seeds[0], &config);
    let mut files = Vec::new();
    for &kappa in &params.kappas {
        let body = table.for_kappa(kappa).to_csv();
        files.push(manifest.write_csv(out_dir, &convergence_csv_name(kappa), &body)?);
    }
    manifest.write_json(out_dir, "convergence_manifest.json")?;
    Ok(ConvergenceOutput { table, manifest, files })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSweepParams {
    pub lambdas: Vec<f64>,
    /// `tokens.n` must be a perfect square; tokens sit on that square grid.
    pub tokens: TokenSpec,
    /// Pooling ratio; `None` picks roughly `√N` landmarks.
    pub pool_ratio: Option<usize>,
    pub epsilon: f64,
    pub ns: NsConfig<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSweepRow {
    pub lambda: f64,
    /// Mean row entropy of the landmark similarity map `k(Q, K̃)`.
    pub mean_entropy: f64,
    /// Share of embedding entries with `|z| < 1e-3`.
    pub sparsity_fraction: f64,
    /// `‖Ĝ − G‖_F / ‖G‖_F` for the key Gram matrix.
    pub nystrom_error: f64,
}

pub const LAMBDA_SWEEP_HEADER: &str = "lambda,mean_entropy,sparsity_fraction,nystrom_error";

pub fn lambda_sweep_csv(rows: &[LambdaSweepRow]) -> String {
    let mut s = format!("{LAMBDA_SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.lambda, r.mean_entropy, r.sparsity_fraction, r.nystrom_error);
    }
    s
}

pub fn sweep_geometry(n: usize, pool_ratio: Option<usize>) -> Result<PoolGeometry> {
    let auto = PoolGeometry::square_auto(n)?;
    match pool_ratio {
        None => Ok(auto),
        Some(r) => PoolGeometry::new(auto.height(), auto.width(), r),
    }
}

/// Per-λ statistics of the Laplacian block on one seeded token set.
pub fn lambda_sweep(params: &LambdaSweepParams) -> Result<Vec<LambdaSweepRow>> {
    if params.lambdas.is_empty() {
        return Err(Error::Usage("lambda sweep needs at least one lambda".into()));
    }
    if let Some(bad) = params.lambdas.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
        return Err(Error::Usage(format!("lambda must satisfy lambda > 0, got {bad}")));
    }
    let geom = sweep_geometry(params.tokens.n, params.pool_ratio)?;
    let d = params.tokens.dim;
    let [q, k, _] = synthetic_qkv(&params.tokens, 1)?;
    let landmarks = select_landmarks(&q, &k, &geom)?;

    let mut rows = Vec::with_capacity(params.lambdas.len());
    for &lambda in &params.lambdas {
        let kernel = KernelSpec::laplacian(lambda)?;
        let cfg = AttentionConfig::new(d, 1, geom)?
            .with_kernel(kernel)
            .with_whitening(WhiteningMode::diagonal(params.epsilon)?)
            .with_ns(params.ns);
        let c = kernel_matrix(&q, &landmarks.k_landmarks, &kernel)?;
        let z = attention_embedding(&q, &k, &cfg, AttentionPath::Auto)?;
        let g = kernel_matrix(&k, &k, &kernel)?;
        let g_hat = nystrom_kernel(&k, &k, &geom, &kernel, &PinvMethod::NewtonSchulz(params.ns))?;
        rows.push(LambdaSweepRow {
            lambda,
            mean_entropy: mean_entropy(&c),
            sparsity_fraction: near_zero_fraction(&z, SPARSITY_THRESHOLD),
            nystrom_error: g_hat.relative_error(&g)?,
        });
    }
    Ok(rows)
}

/// [`lambda_sweep`] written to `lambda_sweep.csv`.
pub fn run_lambda_sweep(params: &LambdaSweepParams, out_dir: &Path) -> Result<(Vec<LambdaSweepRow>, RunManifest)> {
    let rows = lambda_sweep(params)?;
    let config = format!(
        "lambda_sweep;lambdas={};tokens={:?};pool_ratio={:?};epsilon={};ns={:?}",
        join(&params.lambdas),
        params.tokens,
        params.pool_ratio,
        params.epsilon,
        params.ns
    );
    let mut manifest = RunManifest::new(params.tokens.seed, &config);
    manifest.write_csv(out_dir, "lambda_sweep.csv", &lambda_sweep_csv(&rows))?;
    manifest.write_json(out_dir, "lambda_sweep_manifest.json")?;
    Ok((rows, manifest))
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistanceSource {
    Files { q: PathBuf, k: PathBuf },
    /// Queries from `spec`, keys from `spec.seed + 1`.
    Synthetic(TokenSpec),
}

/// Loads or generates the query and key sets for a distance analysis.
pub fn distance_inputs(source: &DistanceSource) -> Result<(DenseMatrix<f64>, DenseMatrix<f64>)> {
    let (q, k) = match source {
        DistanceSource::Files { q, k } => (load_matrix(q)?, load_matrix(k)?),
        DistanceSource::Synthetic(spec) => {
            let q = synthetic_tokens(spec)?;
            let k = synthetic_tokens(&TokenSpec {
                seed: spec.seed.wrapping_add(1),
                ..*spec
            })?;
            (q, k)
        }
    };
    if q.cols() != k.cols() {
        return Err(Error::Usage(format!(
            "query and key dimensions differ: {}x{} vs {}x{}",
            q.rows(),
            q.cols(),
            k.rows(),
            k.cols()
        )));
    }
    Ok((q, k))
}

/// Writes `distances_l1.csv` and `distances_l2_squared.csv`.
pub fn run_distance_analysis(source: &DistanceSource, num_bins: usize, seed: u64, out_dir: &Path) -> Result<RunManifest> {
    let (q, k) = distance_inputs(source)?;
    let config = format!("distance_analysis;source={source:?};bins={num_bins}");
    let mut manifest = RunManifest::new(seed, &config);
    for metric in [DistanceMetric::L1, DistanceMetric::L2Squared] {
        let stats = distance_stats(&q, &k, metric, num_bins)?;
        manifest.write_csv(out_dir, &format!("distances_{}.csv", metric.name()), &stats.to_csv())?;
    }
    manifest.write_json(out_dir, "distances_manifest.json")?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_rejects_bad_lambdas() {
        let mut p = LambdaSweepParams {
            lambdas: vec![],
            tokens: TokenSpec::new(16, 3, 0),
            pool_ratio: None,
            epsilon: 1e-6,
            ns: NsConfig::default(),
        };
        assert!(matches!(lambda_sweep(&p), Err(Error::Usage(_))));
        p.lambdas = vec![1.0, 0.0];
        assert!(matches!(lambda_sweep(&p), Err(Error::Usage(_))));
        p.lambdas = vec![2.0];
        assert_eq!(lambda_sweep(&p).unwrap().len(), 1);
    }

    #[test]
    fn convergence_needs_kappas() {
        let p = ConvergenceParams {
            sizes: vec![8],
            kappas: vec![],
            seeds: vec![0],
            ns: NsConfig::default(),
            cg: CgConfig::default(),
        };
        let dir = std::env::temp_dir();
        assert!(matches!(run_convergence_study(&p, &dir), Err(Error::Usage(_))));
    }
}
