//! Parallel Gaussian process regression: the master-worker runtime, data
//! ingestion, metrics and experiment driver built on `pgpr-core`.

pub mod eval;
pub mod runtime;
