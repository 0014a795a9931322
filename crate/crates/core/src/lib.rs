//! Numerical core for parallel Gaussian process regression with low-rank
//! covariance approximations.
//!
//! Everything in this crate is a pure function over immutable inputs and
//! builds without `std` (it needs `alloc`). The companion `pgpr` crate adds
//! the master-worker runtime, file formats and the command-line front end.
//!
//! Module map:
//!
//! - [`linalg`]: dense row-major matrices, Cholesky factor-and-solve with a
//!   jitter fallback.
//! - [`kernel`]: squared-exponential covariance and covariance assembly.
//! - [`exact`]: full GP posterior, the reference every approximation is
//!   checked against.
//! - [`partition`]: even and clustered data distribution, greedy support
//!   set selection.
//! - [`pitc`]: local/global summaries and the pPITC / pPIC predictors, plus
//!   the centralized PITC / PIC oracles.
//! - [`icf`]: pivoted incomplete Cholesky (serial and block-distributed),
//!   the pICF summaries and predictive components, and the centralized ICF
//!   oracle.

#![no_std]
#![deny(rust_2018_idioms)]
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod exact;
pub mod icf;
pub mod kernel;
pub mod linalg;
pub mod partition;
pub mod pitc;

pub use error::{Error, Result};
pub use exact::{fgp_predict, Dataset, PredictiveDistribution};
pub use kernel::{cov_matrix, kernel, Hyperparameters, InputPoint};
pub use linalg::{pd_solve, Cholesky, Matrix};
pub use partition::{Partition, SupportSet};
