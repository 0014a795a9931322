//! Data ingestion, synthetic data, metrics and the experiment driver.

pub mod config;
pub mod data;
pub mod experiment;
pub mod metrics;
pub mod synthetic;

use crate::runtime::RuntimeError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("config error in `{field}`: {message}")]
    Config { field: &'static str, message: String },
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] pgpr_core::Error),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn is_usage_error(e: &pgpr_core::Error) -> bool {
    use pgpr_core::Error::*;
    matches!(
        e,
        InvalidArgument(_) | InvalidHyperparameters(_) | DimensionMismatch { .. } | DuplicateId(_)
    )
}

impl EvalError {
    /// 2 for bad configuration or input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            EvalError::Core(e) | EvalError::Runtime(RuntimeError::Core(e)) if is_usage_error(e) => 2,
            EvalError::Core(_) | EvalError::Runtime(_) => 3,
            _ => 2,
        }
    }
}
