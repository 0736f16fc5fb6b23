//! Iterative pseudoinverse and linear-system solvers.

mod cg;
mod experiment;
mod newton_schulz;

pub use cg::{conjugate_gradient, CgConfig};
pub use experiment::{convergence_experiment, ExperimentRow, ExperimentTable, SolverKind, EXPERIMENT_CSV_HEADER};
pub use newton_schulz::{
    newton_schulz, NsConfig, NsIteration, NsScaling, Perturbation, DEFAULT_NS_EPSILON_FACTOR, DEFAULT_NS_ITERATIONS,
    DEFAULT_NS_TOLERANCE, DIVERGENCE_FACTOR,
};

use crate::linalg::DenseMatrix;

/// Trace and result of an iterative solve.
///
/// For Newton–Schulz `residual_trace[k]` is `‖I − W Xₖ₊₁‖_F`; for conjugate
/// gradient it is the relative residual `‖B − A Xₖ₊₁‖_F / ‖B‖_F`.
/// `iterates_error` is filled only when a reference solution was supplied.
#[derive(Clone, Debug)]
pub struct SolverReport<T = f64> {
    pub iterates_error: Vec<T>,
    pub residual_trace: Vec<T>,
    pub final_iterate: DenseMatrix<T>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl<T: crate::Scalar> SolverReport<T> {
    /// First iteration (1-based) whose reference error is at most `tol`.
    pub fn iterations_to_error(&self, tol: T) -> Option<usize> {
        self.iterates_error.iter().position(|&e| e <= tol).map(|i| i + 1)
    }
}
