use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kernels::DEFAULT_LAMBDA;
use crate::solvers::{NsScaling, DEFAULT_NS_ITERATIONS};

pub const OUT_DIR_ENV: &str = "LF_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";

/// Run configuration read from `key = value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub lambda: f64,
    /// Whitening regularizer.
    pub epsilon: f64,
    pub ns_iterations: usize,
    pub ns_scaling: NsScaling,
    /// `None` picks roughly `√N` landmarks.
    pub pool_ratio: Option<usize>,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            epsilon: crate::feature_map::DEFAULT_EPSILON,
            ns_iterations: DEFAULT_NS_ITERATIONS,
            ns_scaling: NsScaling::Safe,
            pool_ratio: None,
            seed: 0,
            out_dir: None,
        }
    }
}

impl Config {
    /// Explicit `out_dir`, else `$LF_OUT_DIR`, else `out`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn load(path: &Path) -> Result<Self> {
        parse_config(&std::fs::read_to_string(path)?)
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse value '{raw}' for key '{key}'"),
    })
}

fn domain(line: usize, ok: bool, constraint: &str, raw: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Parse {
            line,
            message: format!("value {raw} violates {constraint}"),
        })
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are
/// ignored and absent keys keep their defaults.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut cfg = Config::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected 'key = value', got '{content}'"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "lambda" => {
                let v: f64 = parse_value(line, key, value)?;
                domain(line, v > 0.0 && v.is_finite(), "lambda > 0", value)?;
                cfg.lambda = v;
            }
            "epsilon" => {
                let v: f64 = parse_value(line, key, value)?;
                domain(line, v > 0.0 && v.is_finite(), "epsilon > 0", value)?;
                cfg.epsilon = v;
            }
            "ns_iterations" => {
                let v: usize = parse_value(line, key, value)?;
                domain(line, v >= 1, "ns_iterations >= 1", value)?;
                cfg.ns_iterations = v;
            }
            "ns_scaling" => {
                cfg.ns_scaling = value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("ns_scaling must be 'paper' or 'safe', got '{value}'"),
                })?;
            }
            "pool_ratio" => {
                let v: usize = parse_value(line, key, value)?;
                domain(line, v >= 1, "pool_ratio >= 1", value)?;
                cfg.pool_ratio = Some(v);
            }
            "seed" => cfg.seed = parse_value(line, key, value)?,
            "out_dir" => {
                domain(line, !value.is_empty(), "out_dir non-empty", value)?;
                cfg.out_dir = Some(PathBuf::from(value));
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key '{other}'"),
                })
            }
        }
    }
    Ok(cfg)
}
