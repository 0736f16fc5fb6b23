//! Laplacian-kernel linear attention on dense matrices.

pub mod attention;
pub mod cli;
pub mod error;
pub mod feature_map;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod nystrom;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use scalar::Scalar;

pub type Matrix = DenseMatrix<f64>;
pub type MatrixF32 = DenseMatrix<f32>;
