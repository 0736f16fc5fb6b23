//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure
//! (divergence, breakdown, or an equivalence check above tolerance).

mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, Config, DEFAULT_OUT_DIR, OUT_DIR_ENV};

use crate::attention::{
    dense_reference_attention, landmark_factors, laplacianformer_attention, materialized_landmark_attention,
    AttentionConfig, DwcLayout, DwcWeights,
};
use crate::error::{Error, Result};
use crate::feature_map::WhiteningMode;
use crate::harness::{
    run_convergence_study, run_distance_analysis, run_lambda_sweep, run_scaling_bench, synthetic_qkv, BenchOp,
    BenchOptions, ConvergenceParams, DistanceSource, LambdaSweepParams, RunManifest, TokenSpec,
};
use crate::kernels::{kernel_grad, kernel_matrix, kernel_scalar, KernelFamily, KernelSpec};
use crate::linalg::{load_matrix, save_matrix};
use crate::nystrom::PoolGeometry;
use crate::solvers::{CgConfig, NsConfig, Perturbation, SolverKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Tolerance for `attn-check`.
pub const ATTN_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "lapformer", version, about = "Laplacian-kernel linear attention experiments")]
struct Cli {
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides config and $LF_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Newton–Schulz vs conjugate gradient convergence traces.
    BenchSolver(BenchSolverArgs),
    /// Wall-time scaling of feature map, linear and softmax attention.
    BenchScaling(BenchScalingArgs),
    /// Entropy, sparsity and Nyström error across kernel scales.
    LambdaSweep(LambdaSweepArgs),
    /// Histograms and moments of query–key distances.
    DistAnalysis(DistArgs),
    /// Compares the attention pipeline against its explicit evaluation.
    AttnCheck(AttnCheckArgs),
    /// Evaluates a kernel on two vectors or two matrix files.
    KernelEval(KernelEvalArgs),
}

#[derive(Debug, Args)]
struct BenchSolverArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,50")]
    kappa: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    size: Vec<usize>,
    /// Seeds; defaults to the config seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Newton–Schulz iterations; defaults to ns_iterations from the config.
    #[arg(long)]
    iterations: Option<usize>,
    /// Absolute diagonal perturbation for Newton–Schulz.
    #[arg(long, default_value_t = 1e-9)]
    ns_epsilon: f64,
    #[arg(long, default_value_t = 1e-12)]
    cg_tol: f64,
    #[arg(long, default_value_t = 1000)]
    cg_max_iter: usize,
}

#[derive(Debug, Args)]
struct BenchScalingArgs {
    /// feature_map, linear_attention, softmax_attention or all.
    #[arg(long, default_value = "all")]
    op: String,
    #[arg(long, value_delimiter = ',', default_value = "1024,2048,4096,8192")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
}

#[derive(Debug, Args)]
struct LambdaSweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4,8")]
    lambdas: Vec<f64>,
    /// Token count; must be a perfect square.
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
}

#[derive(Debug, Args)]
struct DistArgs {
    /// Query matrix file; with --k, replaces the synthetic tokens.
    #[arg(long, requires = "k")]
    q: Option<PathBuf>,
    #[arg(long, requires = "q")]
    k: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = crate::kernels::DEFAULT_NUM_BINS)]
    bins: usize,
}

#[derive(Debug, Args)]
struct AttnCheckArgs {
    /// Token count; must be a perfect square.
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Pooling ratio.
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    dv: usize,
}

#[derive(Debug, Args)]
struct KernelEvalArgs {
    /// laplacian or gaussian.
    #[arg(long, default_value = "laplacian")]
    kernel: String,
    /// λ for laplacian (default from config) or σ for gaussian (default √d).
    #[arg(long)]
    scale: Option<f64>,
    /// Comma-separated vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y: Vec<f64>,
    /// Matrix files; writes kernel_matrix.txt to the output directory.
    #[arg(long, requires = "kfile", conflicts_with = "x")]
    qfile: Option<PathBuf>,
    #[arg(long, requires = "qfile")]
    kfile: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command, and returns the
/// exit code. Summaries go to `out`, diagnostics to standard error.
pub fn dispatch<I, S>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{e}");
                    EXIT_USAGE
                }
                ErrorKind::InvalidSubcommand => {
                    eprint!("{e}");
                    eprintln!("valid subcommands: {}", subcommand_names().join(", "));
                    EXIT_USAGE
                }
                _ => {
                    eprint!("{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match run(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

/// Subcommand names in declaration order.
pub fn subcommand_names() -> Vec<String> {
    use clap::CommandFactory;
    Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect()
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if cli.out_dir.is_some() {
        cfg.out_dir = cli.out_dir.clone();
    }
    let out_dir = cfg.resolve_out_dir();
    match cli.command {
        Command::BenchSolver(a) => bench_solver(&cfg, &a, &out_dir, out),
        Command::BenchScaling(a) => bench_scaling(&cfg, &a, &out_dir, out),
        Command::LambdaSweep(a) => lambda_sweep_cmd(&cfg, &a, &out_dir, out),
        Command::DistAnalysis(a) => dist_analysis(&cfg, &a, &out_dir, out),
        Command::AttnCheck(a) => attn_check(&cfg, &a, out),
        Command::KernelEval(a) => kernel_eval(&cfg, &a, &out_dir, out),
    }
}

fn ns_config(cfg: &Config, iterations: usize, epsilon: Perturbation<f64>, tolerance: f64) -> Result<NsConfig> {
    NsConfig::new(iterations, epsilon, cfg.ns_scaling, tolerance)
}

fn bench_solver(cfg: &Config, a: &BenchSolverArgs, out_dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let seeds = if a.seeds.is_empty() { vec![cfg.seed] } else { a.seeds.clone() };
    let params = ConvergenceParams {
        sizes: a.size.clone(),
        kappas: a.kappa.clone(),
        seeds,
        ns: ns_config(
            cfg,
            a.iterations.unwrap_or(cfg.ns_iterations),
            Perturbation::Absolute(a.ns_epsilon),
            0.0,
        )?,
        cg: CgConfig {
            tol: a.cg_tol,
            max_iter: a.cg_max_iter,
        },
    };
    let res = run_convergence_study(&params, out_dir)?;
    writeln!(out, "solver convergence ({} scaling)", cfg.ns_scaling)?;
    for &size in &params.sizes {
        for &kappa in &params.kappas {
            for &seed in &params.seeds {
                let ns = res.table.trace(SolverKind::NewtonSchulz, size, kappa, seed);
                let cg = res.table.trace(SolverKind::ConjugateGradient, size, kappa, seed);
                let show = |it: Option<usize>| it.map_or("-".to_string(), |i| i.to_string());
                writeln!(
                    out,
                    "size={size} kappa={kappa} seed={seed} ns_final={:.3e} ns_iters_to_1e-6={} cg_final={:.3e} cg_iters_to_1e-6={}",
                    ns.last().copied().unwrap_or(f64::NAN),
                    show(res.table.iterations_to(SolverKind::NewtonSchulz, size, kappa, seed, 1e-6)),
                    cg.last().copied().unwrap_or(f64::NAN),
                    show(res.table.iterations_to(SolverKind::ConjugateGradient, size, kappa, seed, 1e-6)),
                )?;
            }
        }
    }
    for f in &res.files {
        writeln!(out, "wrote {}", f.display())?;
    }
    if res.table.unconverged.is_empty() {
        return Ok(EXIT_OK);
    }
    for (solver, size, kappa, seed) in &res.table.unconverged {
        writeln!(out, "not converged: {} size={size} kappa={kappa} seed={seed}", solver.name())?;
    }
    Ok(EXIT_NUMERICAL)
}

fn bench_scaling(cfg: &Config, a: &BenchScalingArgs, out_dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let ops = if a.op == "all" {
        vec![BenchOp::FeatureMap, BenchOp::LinearAttention, BenchOp::SoftmaxAttention]
    } else {
        vec![a.op.parse()?]
    };
    let opts = BenchOptions {
        repeats: a.repeats,
        seed: cfg.seed,
        ..BenchOptions::default()
    };
    for op in ops {
        let report = run_scaling_bench(op, &a.sizes, &opts)?;
        let config = format!("bench_scaling;op={};sizes={:?};opts={:?}", op.name(), a.sizes, opts);
        let mut manifest = RunManifest::new(cfg.seed, &config);
        let path = manifest.write_csv(out_dir, &format!("scaling_{}.csv", op.name()), &report.to_csv())?;
        for r in &report.results {
            writeln!(
                out,
                "{} n={} median_ns={} p10_ns={} p90_ns={}",
                r.label, r.n, r.wall_ns_median, r.wall_ns_p10, r.wall_ns_p90
            )?;
        }
        match report.exponent {
            Some(e) => writeln!(out, "{} exponent={e:.3}", op.name())?,
            None => writeln!(out, "{} exponent=none", op.name())?,
        }
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(EXIT_OK)
}

fn lambda_sweep_cmd(cfg: &Config, a: &LambdaSweepArgs, out_dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let params = LambdaSweepParams {
        lambdas: a.lambdas.clone(),
        tokens: TokenSpec::new(a.n, a.dim, cfg.seed),
        pool_ratio: cfg.pool_ratio,
        epsilon: cfg.epsilon,
        ns: ns_config(cfg, cfg.ns_iterations, Perturbation::Relative(1e-6), 1e-8)?,
    };
    let (rows, _) = run_lambda_sweep(&params, out_dir)?;
    for r in &rows {
        writeln!(
            out,
            "lambda={} mean_entropy={:.6} sparsity={:.6} nystrom_error={:.3e}",
            r.lambda, r.mean_entropy, r.sparsity_fraction, r.nystrom_error
        )?;
    }
    writeln!(out, "wrote {}", out_dir.join("lambda_sweep.csv").display())?;
    Ok(EXIT_OK)
}

fn dist_analysis(cfg: &Config, a: &DistArgs, out_dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let source = match (&a.q, &a.k) {
        (Some(q), Some(k)) => DistanceSource::Files { q: q.clone(), k: k.clone() },
        _ => DistanceSource::Synthetic(TokenSpec::new(a.n, a.dim, cfg.seed)),
    };
    let manifest = run_distance_analysis(&source, a.bins, cfg.seed, out_dir)?;
    for f in &manifest.outputs {
        writeln!(out, "wrote {}", out_dir.join(f).display())?;
    }
    Ok(EXIT_OK)
}

fn attn_check(cfg: &Config, a: &AttnCheckArgs, out: &mut dyn Write) -> Result<i32> {
    let side = (a.n as f64).sqrt().round() as usize;
    if side * side != a.n {
        return Err(Error::Usage(format!("--n must be a perfect square, got {}", a.n)));
    }
    let geom = PoolGeometry::new(side, side, a.r)?;
    let acfg = AttentionConfig::new(a.dim, a.dv, geom)?
        .with_kernel(KernelSpec::laplacian(cfg.lambda)?)
        .with_whitening(WhiteningMode::diagonal(cfg.epsilon)?)
        .with_ns(ns_config(cfg, cfg.ns_iterations, Perturbation::Relative(1e-6), 1e-8)?);
    let [q, k, v] = synthetic_qkv(&TokenSpec::new(a.n, a.dim, cfg.seed), a.dv)?;
    let weights = DwcWeights::mean_box(a.dv, acfg.dwc_width, DwcLayout::Grid)?;

    let got = laplacianformer_attention(&q, &k, &v, &acfg, &weights)?;
    let (label, expected) = if geom.n_landmarks() == a.n {
        (
            "dense reference",
            dense_reference_attention(&q, &k, &v, &acfg.kernel, &acfg.whitening, &weights, &geom)?,
        )
    } else {
        let factors = landmark_factors(&q, &k, &acfg)?;
        ("materialized landmark operator", materialized_landmark_attention(&factors, &v, &weights, &geom)?)
    };
    let err = got.relative_error(&expected)?;
    writeln!(out, "attn-check n={} r={} m={} vs {label}", a.n, a.r, geom.n_landmarks())?;
    writeln!(out, "max relative error: {err:.3e}")?;
    if err <= ATTN_CHECK_TOL {
        writeln!(out, "PASS (tolerance {ATTN_CHECK_TOL:e})")?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "FAIL (tolerance {ATTN_CHECK_TOL:e})")?;
        Ok(EXIT_NUMERICAL)
    }
}

fn kernel_eval(cfg: &Config, a: &KernelEvalArgs, out_dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let family: KernelFamily = a.kernel.parse()?;
    let spec_for = |d: usize| -> Result<KernelSpec> {
        match (family, a.scale) {
            (KernelFamily::Laplacian, s) => KernelSpec::laplacian(s.unwrap_or(cfg.lambda)),
            (KernelFamily::Gaussian, Some(s)) => KernelSpec::gaussian(s),
            (KernelFamily::Gaussian, None) => Ok(KernelSpec::gaussian_for_dim(d)),
        }
    };
    if let (Some(qf), Some(kf)) = (&a.qfile, &a.kfile) {
        let q = load_matrix::<f64>(qf)?;
        let k = load_matrix::<f64>(kf)?;
        let g = kernel_matrix(&q, &k, &spec_for(q.cols())?)?;
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("kernel_matrix.txt");
        save_matrix(&g, &path)?;
        writeln!(out, "kernel matrix {}x{} wrote {}", g.rows(), g.cols(), path.display())?;
        return Ok(EXIT_OK);
    }
    if a.x.is_empty() || a.y.is_empty() {
        return Err(Error::Usage("kernel-eval needs --x and --y, or --qfile and --kfile".into()));
    }
    let spec = spec_for(a.x.len())?;
    let value = kernel_scalar(&a.x, &a.y, &spec)?;
    writeln!(out, "{} scale={} k={value:.17e}", spec.family(), spec.scale())?;
    match kernel_grad(&a.x, &a.y, &spec) {
        Ok(g) => {
            let g: Vec<String> = g.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "grad_x={}", g.join(","))?;
        }
        Err(e @ Error::Kink { .. }) => writeln!(out, "grad_x=undefined ({e})")?,
        Err(e) => return Err(e),
    }
    Ok(EXIT_OK)
}
