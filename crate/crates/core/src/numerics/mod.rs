//! Dense linear algebra shared by every other module.

mod eigen;
mod lu;
mod matrix;
mod stats;

pub use eigen::{jacobi, sym_eig, tridiagonal_ql, EigenDecomposition, JACOBI_MAX_ORDER};
pub use lu::{cholesky, invert, Lu, MAX_CONDITION};
pub use matrix::{dot, Matrix};
pub use stats::{apply_stats, centered_covariance, standardize, undo_stats, ColumnStats, MIN_STD};
