//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: max asymmetry {deviation:e} exceeds tolerance {tol:e}")]
    NotSymmetric { deviation: f64, tol: f64 },

    #[error("matrix is not positive definite (leading minor of order {minor})")]
    NotPositiveDefinite { minor: usize },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e} below clamp threshold {threshold:e})")]
    NotPsd { eigenvalue: f64, threshold: f64 },

    #[error("singular matrix: zero diagonal entry at index {index}")]
    SingularMatrix { index: usize },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("non-finite entry at ({row}, {col})")]
    NotFinite { row: usize, col: usize },

    #[error("input must be strictly positive: entry {index} is {value:e}")]
    NonPositiveInput { index: usize, value: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        /// Last iterate, carried so callers can inspect or restart.
        last: Vec<f64>,
    },

    #[error("operator is singular or numerically rank-deficient")]
    SingularS,

    #[error("factorization infeasible: relative residual {residual:e}")]
    InfeasibleFactorization { residual: f64 },

    #[error("pair violates the streaming constraint: row {row} reads measurement {measurement} released later")]
    NotOnline { row: usize, measurement: usize },

    #[error("W*H does not reproduce the target: relative residual {residual:e}")]
    NonFactorization { residual: f64 },

    #[error("invalid privacy parameters: {context}")]
    InvalidPrivacyParams { context: String },

    #[error("input exceeds the per-entry bound: |x[{index}]| = {value} > {bound}")]
    InputOutOfRange { index: usize, value: f64, bound: f64 },

    #[error("adjacency enumeration would exceed {limit} candidates")]
    TooLargeForBruteForce { limit: u64 },

    #[error("noise stream exhausted after {steps} steps")]
    StreamExhausted { steps: usize },

    #[error("linear algebra backend failure: {0}")]
    Backend(#[from] ndarray_linalg::error::LinalgError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
        }
    }
}
