//! Dense linear algebra, seeded randomness, special functions and the small
//! statistics kit shared by every other module.

mod linalg;
mod random;
mod special;
mod stats;

pub use linalg::{cosine, finite_difference_jacobian, max_abs_deviation_from_identity, spectral_extremes, spectral_norm};
pub use random::{sample_orthonormal_frame, sample_unit_sphere, standard_normal_vector, RngSeed, RngStream};
pub use special::{adaptive_simpson, log_beta, log_gamma};
pub use stats::{ks_statistic, ks_two_sample, mean_and_stderr, pearson, sign_test_p_value};

use thiserror::Error;

/// Dense column vector of `f64`.
pub type RealVector = nalgebra::DVector<f64>;
/// Dense matrix of `f64` (nalgebra stores column-major; JSON interchange is row-major).
pub type RealMatrix = nalgebra::DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid frame: requested {requested} columns in dimension {dim}")]
    InvalidFrame { dim: usize, requested: usize },
    #[error("argument outside the domain of {function}: {value}")]
    Domain { function: &'static str, value: f64 },
}

/// Builds a matrix from row-major nested rows, checking that it is rectangular.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<RealMatrix, NumericsError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(NumericsError::InvalidDimension("empty matrix".into()));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(NumericsError::InvalidDimension("ragged matrix rows".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(NumericsError::InvalidDimension("non-finite matrix entry".into()));
    }
    Ok(RealMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Inverse of [`matrix_from_rows`].
pub fn matrix_to_rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
