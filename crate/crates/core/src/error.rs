use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The covariance matrix could not be factorized. Carries a nugget that
    /// is worth retrying with.
    #[error("covariance matrix is not positive definite (retry with nugget >= {suggested_nugget:e})")]
    Factorization { suggested_nugget: f64 },

    /// The candidate point carries (numerically) no predictive variance, so
    /// conditioning on it is undefined.
    #[error("degenerate update: predictive variance {variance:e} at the new point")]
    DegenerateUpdate { variance: f64 },

    #[error("duplicate design point at row {row}")]
    DuplicatePoint { row: usize },

    /// Truncation interval carries less than 1e-300 Gaussian mass.
    #[error("truncated normal interval ({lower}, {upper}) has negligible mass")]
    EmptyInterval { lower: f64, upper: f64 },

    #[error("hyperparameter fitting failed: {0}")]
    Fitting(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
