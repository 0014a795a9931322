//! Master-worker execution of the parallel predictors.
//!
//! The master owns the partition and the fused summaries; workers own one
//! block each and only see what the master sends them. All traffic is
//! tallied in a [`Ledger`].

mod ledger;
mod master;
mod protocol;
mod store;
mod transport;
mod worker;

pub use ledger::{Collective, KindTally, Ledger};
pub use master::{run_icf_factor, run_picf, run_ppic, run_ppitc, Cluster, PartitionMode, RunOutput};
pub use protocol::{Command, MessageKind, Reply, WorkerMessage, WorkerSetup};
pub use store::SummaryStore;
pub use transport::{read_frame, serve_worker, write_frame, ProcessTransport, ThreadTransport, Transport};
pub use worker::WorkerState;

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Core(#[from] pgpr_core::Error),
    #[error("worker {index} failed: {message}")]
    WorkerFailed { index: usize, message: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
