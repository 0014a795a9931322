use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    /// Cholesky failed even after the last jitter attempt.
    #[error("matrix is not positive definite (last jitter attempted {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("duplicate point id {0}")]
    DuplicateId(u64),

    /// A diagonal residual of the incomplete Cholesky went below tolerance.
    #[error("incomplete Cholesky breakdown at step {step}: residual {residual:e}")]
    FactorBreakdown { step: usize, residual: f64 },
}
