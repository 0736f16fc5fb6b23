use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use crate::attention::{linear_attention, softmax_attention, EluPlusOne};
use crate::error::{Error, Result};
use crate::feature_map::{embed_similarities, WhiteningMode};
use crate::kernels::{kernel_matrix, KernelSpec};
use crate::linalg::{gaussian_matrix, rng_from_seed, DenseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchOp {
    /// Laplacian similarities to a fixed landmark set, then the injective
    /// embedding.
    FeatureMap,
    /// Kernel linear attention with the `elu + 1` feature map.
    LinearAttention,
    /// Row-streaming softmax attention.
    SoftmaxAttention,
}

impl BenchOp {
    pub fn name(&self) -> &'static str {
        match self {
            BenchOp::FeatureMap => "feature_map",
            BenchOp::LinearAttention => "linear_attention",
            BenchOp::SoftmaxAttention => "softmax_attention",
        }
    }
}

impl std::str::FromStr for BenchOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feature_map" => Ok(BenchOp::FeatureMap),
            "linear_attention" => Ok(BenchOp::LinearAttention),
            "softmax_attention" => Ok(BenchOp::SoftmaxAttention),
            other => Err(Error::Usage(format!(
                "unknown bench op '{other}' (expected feature_map, linear_attention or softmax_attention)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchResult {
    pub label: String,
    pub n: usize,
    /// Per-call wall time.
    pub wall_ns_median: u64,
    pub wall_ns_p10: u64,
    pub wall_ns_p90: u64,
    pub repeats: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOptions {
    pub repeats: usize,
    pub warmup: usize,
    pub head_dim: usize,
    pub value_dim: usize,
    pub landmarks: usize,
    pub seed: u64,
    /// Calls are batched until one timed sample lasts at least this long.
    pub min_sample_ns: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            repeats: 5,
            warmup: 1,
            head_dim: 16,
            value_dim: 16,
            landmarks: 64,
            seed: 0,
            min_sample_ns: 2_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub op: BenchOp,
    pub results: Vec<BenchResult>,
    /// Least-squares slope of `ln(median)` against `ln(n)`; absent for a
    /// single size.
    pub exponent: Option<f64>,
}

pub const BENCH_CSV_HEADER: &str = "label,n,wall_ns_median,wall_ns_p10,wall_ns_p90,repeats";

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{BENCH_CSV_HEADER}\n");
        for r in &self.results {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.label, r.n, r.wall_ns_median, r.wall_ns_p10, r.wall_ns_p90, r.repeats
            );
        }
        match self.exponent {
            Some(e) => {
                let _ = writeln!(s, "# exponent: {e}");
            }
            None => s.push_str("# exponent: none\n"),
        }
        s
    }
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[u64], p: f64) -> u64 {
    let idx = ((p * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1);
    sorted[idx]
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Median-of-repeats timing of `f`, with warmup calls discarded.
pub fn time_op<F: FnMut() -> Result<()>>(label: &str, n: usize, opts: &BenchOptions, mut f: F) -> Result<BenchResult> {
    if opts.repeats < 5 {
        return Err(Error::Usage(format!("timing needs at least 5 repeats, got {}", opts.repeats)));
    }
    for _ in 0..opts.warmup {
        f()?;
    }
    let mut batch = 1u64;
    loop {
        let t = Instant::now();
        for _ in 0..batch {
            f()?;
        }
        if t.elapsed().as_nanos() as u64 >= opts.min_sample_ns || batch >= 1 << 20 {
            break;
        }
        batch *= 2;
    }
    let mut samples = Vec::with_capacity(opts.repeats);
    for _ in 0..opts.repeats {
        let t = Instant::now();
        for _ in 0..batch {
            f()?;
        }
        samples.push(t.elapsed().as_nanos() as u64 / batch);
    }
    samples.sort_unstable();
    Ok(BenchResult {
        label: label.to_string(),
        n,
        wall_ns_median: percentile(&samples, 0.5),
        wall_ns_p10: percentile(&samples, 0.1),
        wall_ns_p90: percentile(&samples, 0.9),
        repeats: opts.repeats,
    })
}

/// Times `op` at each size on seeded Gaussian inputs and fits the
/// log-log exponent.
pub fn run_scaling_bench(op: BenchOp, sizes: &[usize], opts: &BenchOptions) -> Result<ScalingReport> {
    if sizes.is_empty() {
        return Err(Error::Usage("scaling bench needs at least one size".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::Usage("scaling bench sizes must be positive and strictly ascending".into()));
    }
    let mut rng = rng_from_seed(opts.seed);
    let landmarks: DenseMatrix<f64> = gaussian_matrix(opts.landmarks, opts.head_dim, &mut rng);
    let kernel = KernelSpec::default();
    let mode = WhiteningMode::default();

    let mut results = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let q: DenseMatrix<f64> = gaussian_matrix(n, opts.head_dim, &mut rng);
        let k: DenseMatrix<f64> = gaussian_matrix(n, opts.head_dim, &mut rng);
        let v: DenseMatrix<f64> = gaussian_matrix(n, opts.value_dim, &mut rng);
        let r = match op {
            BenchOp::FeatureMap => time_op(op.name(), n, opts, || {
                let c = kernel_matrix(&q, &landmarks, &kernel)?;
                black_box(embed_similarities(&c, &mode)?);
                Ok(())
            })?,
            BenchOp::LinearAttention => time_op(op.name(), n, opts, || {
                black_box(linear_attention(&q, &k, &v, &EluPlusOne)?);
                Ok(())
            })?,
            BenchOp::SoftmaxAttention => time_op(op.name(), n, opts, || {
                black_box(softmax_attention(&q, &k, &v)?);
                Ok(())
            })?,
        };
        results.push(r);
    }
    let exponent = fit_exponent(
        &results
            .iter()
            .map(|r| (r.n as f64, r.wall_ns_median.max(1) as f64))
            .collect::<Vec<_>>(),
    );
    Ok(ScalingReport { op, results, exponent })
}
