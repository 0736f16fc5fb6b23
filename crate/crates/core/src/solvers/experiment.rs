use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, matmul, pinv_oracle, random_spd, rng_from_seed, DenseMatrix, SpdSpec};

use super::{conjugate_gradient, newton_schulz, CgConfig, NsConfig};

pub const EXPERIMENT_CSV_HEADER: &str = "solver,size,kappa,seed,iteration,relative_error";

/// Rank cut-off used for the reference pseudoinverse.
const ORACLE_RANK_TOL: f64 = 1e-14;

/// Offset mixed into the seed of the right-hand side so it is not derived
/// from the same stream as the test matrix.
const RHS_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    NewtonSchulz,
    ConjugateGradient,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::NewtonSchulz => "newton_schulz",
            SolverKind::ConjugateGradient => "cg",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub solver: SolverKind,
    pub size: usize,
    pub kappa: f64,
    pub seed: u64,
    /// 1-based.
    pub iteration: usize,
    pub relative_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    /// `(solver, size, κ, seed)` cells whose run did not report convergence.
    pub unconverged: Vec<(SolverKind, usize, f64, u64)>,
}

impl ExperimentTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(EXPERIMENT_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:e}",
                r.solver.name(),
                r.size,
                r.kappa,
                r.seed,
                r.iteration,
                r.relative_error
            );
        }
        s
    }

    pub fn for_kappa(&self, kappa: f64) -> ExperimentTable {
        ExperimentTable {
            rows: self.rows.iter().filter(|r| r.kappa == kappa).cloned().collect(),
            unconverged: self.unconverged.iter().filter(|c| c.2 == kappa).copied().collect(),
        }
    }

    /// Error trace of one `(solver, size, κ, seed)` cell, in iteration order.
    pub fn trace(&self, solver: SolverKind, size: usize, kappa: f64, seed: u64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.solver == solver && r.size == size && r.kappa == kappa && r.seed == seed)
            .map(|r| r.relative_error)
            .collect()
    }

    /// First iteration at which a cell's error is at most `tol`.
    pub fn iterations_to(&self, solver: SolverKind, size: usize, kappa: f64, seed: u64, tol: f64) -> Option<usize> {
        self.trace(solver, size, kappa, seed)
            .iter()
            .position(|&e| e <= tol)
            .map(|i| i + 1)
    }
}

/// Runs Newton–Schulz (against the eigendecomposition pseudoinverse) and CG
/// (on a seeded random right-hand side, against the direct solution) for
/// every `(size, κ, seed)` cell, in that nesting order.
pub fn convergence_experiment(
    sizes: &[usize],
    kappas: &[f64],
    seeds: &[u64],
    ns_cfg: &NsConfig<f64>,
    cg_cfg: &CgConfig<f64>,
) -> Result<ExperimentTable> {
    if sizes.is_empty() || kappas.is_empty() || seeds.is_empty() {
        return Err(Error::Usage(
            "convergence experiment needs at least one size, kappa and seed".into(),
        ));
    }
    ns_cfg.validate()?;
    let mut table = ExperimentTable::default();
    for &size in sizes {
        for &kappa in kappas {
            for &seed in seeds {
                let w = random_spd::<f64>(&SpdSpec::new(size, kappa, seed))?;
                let w_pinv = pinv_oracle(&w, ORACLE_RANK_TOL)?;
                let ns = newton_schulz(&w, ns_cfg, Some(&w_pinv))?;
                push_trace(&mut table, SolverKind::NewtonSchulz, size, kappa, seed, &ns.iterates_error);
                if !ns.converged {
                    table.unconverged.push((SolverKind::NewtonSchulz, size, kappa, seed));
                }

                let mut rng = rng_from_seed(seed ^ RHS_SEED_OFFSET);
                let b: DenseMatrix<f64> = gaussian_matrix(size, 1, &mut rng);
                let x_star = matmul(&w_pinv, &b)?;
                let cg = conjugate_gradient(&w, &b, cg_cfg.tol, cg_cfg.max_iter, Some(&x_star))?;
                push_trace(&mut table, SolverKind::ConjugateGradient, size, kappa, seed, &cg.iterates_error);
                if !cg.converged {
                    table.unconverged.push((SolverKind::ConjugateGradient, size, kappa, seed));
                }
            }
        }
    }
    Ok(table)
}

fn push_trace(table: &mut ExperimentTable, solver: SolverKind, size: usize, kappa: f64, seed: u64, errors: &[f64]) {
    table.rows.extend(errors.iter().enumerate().map(|(i, &e)| ExperimentRow {
        solver,
        size,
        kappa,
        seed,
        iteration: i + 1,
        relative_error: e,
    }));
}
