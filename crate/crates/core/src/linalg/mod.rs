//! Dense linear-algebra substrate.

mod eig;
mod io;
mod matrix;
mod ops;
mod random;

pub use eig::{penrose_residuals, pinv_oracle, sym_eig, EigenDecomposition, MAX_SWEEPS, SYMMETRY_TOL};
pub use io::{format_matrix, load_matrix, parse_matrix, read_matrix, save_matrix, write_matrix};
pub use matrix::DenseMatrix;
pub use ops::{dot, matmul, matmul_tn, matvec, norm, norm2, spectral_norm, NormKind, SPECTRAL_MAX_ITER, SPECTRAL_TOL};
pub use random::{
    gaussian_matrix, log_uniform_spectrum, planted_spd, random_orthogonal, random_spd, rng_from_seed, SpdSpec,
};
