use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("Laplacian kernel is not differentiable here: coordinate {coordinate} of x - y is zero")]
    Kink { coordinate: usize },

    #[error("Newton-Schulz iteration diverged at iteration {iteration}")]
    Divergence {
        iteration: usize,
        residual_trace: Vec<f64>,
    },

    #[error("conjugate gradient breakdown at iteration {iteration}: p^T A p = {curvature:e}, matrix is not SPD")]
    NotSpd { iteration: usize, curvature: f64 },

    #[error("zero normalizer in row {row}")]
    Degenerate { row: usize },

    #[error("full whitening is limited to N <= {limit} similarity coordinates, got N = {n}")]
    ScaleGuard { n: usize, limit: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left, right }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for failures of the numerics themselves (divergence, breakdown,
    /// degenerate normalizers) as opposed to bad input or usage.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::Divergence { .. }
                | Error::NotSpd { .. }
                | Error::Degenerate { .. }
        )
    }
}
