use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {got} exceeds the supported limit {limit}")]
    DimensionGuard {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("matrix is not Hermitian (max |A_jk - conj(A_kj)| = {0:e})")]
    NotHermitian(f64),

    #[error("unsupported Pauli support: {0}")]
    Support(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("hard-function sampler gave up after {attempts} attempts (smallest max |f^(S)| seen: {best_max_coeff})")]
    RetryCapExceeded { attempts: usize, best_max_coeff: f64 },

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
