//! Geometry of the UTDAT Lie group.
//!
//! A non-degenerate Gaussian `N(mu, Sigma)` is identified with the
//! `(n+1)x(n+1)` upper-triangular affine matrix
//!
//! ```text
//! G = [ U  mu ]      U * U^T = Sigma,  U upper triangular, diag(U) > 0
//!     [ 0   1 ]
//! ```
//!
//! These matrices are closed under multiplication and inversion, so
//! Gaussians form a Lie group. Its Lie algebra consists of matrices with
//! the same shape and a zero bottom row. This module provides the group
//! operations, the matrix exponential/logarithm kernels, log/exp maps at
//! an arbitrary base point, the left-invariant geodesic distance, the
//! intrinsic (Karcher) mean, and closed forms for the diagonal case used
//! by the auto-encoder's exponential mapping layer.

mod diag;
mod kernels;
mod utdat;

pub use diag::{
    diag_exp_map, diag_exp_map_jacobian, diag_log_map, exprel, exprel_derivative, intrinsic_loss,
    log_ratio, DiagExpJacobian, DiagGaussian, TangentDiag, SINGULARITY_THRESHOLD,
};
pub use kernels::{matrix_exp, matrix_log, sqrtm_upper_triangular};
pub use utdat::{
    exp_map, gaussian_from_utdat, geodesic_distance, group_inv, group_mul, intrinsic_mean, log_map,
    sample_latent, utdat_from_gaussian, KarcherMean, TangentMatrix, Utdat,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieGroupError {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NonPositiveDefinite { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{0} did not converge")]
    NonConvergent(&'static str),
    #[error("invalid UTDAT: {0}")]
    InvalidUtdat(String),
    #[error("invalid tangent: {0}")]
    InvalidTangent(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("non-finite input")]
    NonFinite,
}

pub type Result<T, E = LieGroupError> = std::result::Result<T, E>;
