//! Deterministic experiment drivers. Every CSV they write starts with a
//! `# manifest: <digest>` line identifying the configuration that produced it.

mod drivers;
mod manifest;
mod scaling;
mod synthetic;

pub use drivers::{
    convergence_csv_name, distance_inputs, lambda_sweep, lambda_sweep_csv, run_convergence_study,
    run_distance_analysis, run_lambda_sweep, sweep_geometry, ConvergenceOutput, ConvergenceParams, DistanceSource,
    LambdaSweepParams, LambdaSweepRow, LAMBDA_SWEEP_HEADER, SPARSITY_THRESHOLD,
};
pub use manifest::{config_digest, RunManifest, TOOL_VERSION};
pub use scaling::{
    fit_exponent, run_scaling_bench, time_op, BenchOp, BenchOptions, BenchResult, ScalingReport, BENCH_CSV_HEADER,
};
pub use synthetic::{synthetic_qkv, synthetic_tokens, TokenSpec};
