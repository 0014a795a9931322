//! Commands the master sends and the replies workers send back.

use std::fmt;

use pgpr_core::icf::{IcfComponent, IcfFactorBlock, IcfGlobalSummary, IcfLocalSummary, PivotCandidate, PivotRow};
use pgpr_core::pitc::{PitcGlobalSummary, PitcLocalSummary};
use pgpr_core::{Dataset, Hyperparameters, InputPoint, Matrix, PredictiveDistribution, SupportSet};
use serde::{Deserialize, Serialize};

/// Everything a worker needs before any protocol step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkerSetup {
    pub hyper: Hyperparameters,
    pub block: Dataset,
    /// The query points paired with this block (pPITC, pPIC).
    pub query_block: Vec<InputPoint>,
    /// The whole query set (pICF needs every column of `Σ_DU`).
    pub query: Vec<InputPoint>,
    pub support: Option<SupportSet>,
    pub full_cov: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Command {
    Setup(Box<WorkerSetup>),
    ClusterCenter { seed: u64 },
    PitcSummary,
    PpitcPredict { global: PitcGlobalSummary },
    PpicPredict { global: PitcGlobalSummary },
    IcfBegin { rank: usize },
    IcfCandidate,
    IcfPivotRow { local_index: usize },
    IcfApplyPivot { row: PivotRow },
    IcfFactorBlock,
    IcfSummary,
    IcfSummaryHead,
    IcfSummarySlices { bounds: Vec<(usize, usize)> },
    IcfGlobalSlice { phi_total: Matrix, slices: Vec<Matrix> },
    IcfComponent { global: IcfGlobalSummary },
    Shutdown,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Setup(_) => "setup",
            Command::ClusterCenter { .. } => "cluster-center",
            Command::PitcSummary => "pitc-summary",
            Command::PpitcPredict { .. } => "ppitc-predict",
            Command::PpicPredict { .. } => "ppic-predict",
            Command::IcfBegin { .. } => "icf-begin",
            Command::IcfCandidate => "icf-candidate",
            Command::IcfPivotRow { .. } => "icf-pivot-row",
            Command::IcfApplyPivot { .. } => "icf-apply-pivot",
            Command::IcfFactorBlock => "icf-factor-block",
            Command::IcfSummary => "icf-summary",
            Command::IcfSummaryHead => "icf-summary-head",
            Command::IcfSummarySlices { .. } => "icf-summary-slices",
            Command::IcfGlobalSlice { .. } => "icf-global-slice",
            Command::IcfComponent { .. } => "icf-component",
            Command::Shutdown => "shutdown",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Reply {
    Ack,
    Center(Vec<f64>),
    PitcLocal(PitcLocalSummary),
    Prediction(PredictiveDistribution),
    Candidate(Option<PivotCandidate>),
    PivotRow(PivotRow),
    Factor(IcfFactorBlock),
    IcfLocal(IcfLocalSummary),
    IcfHead { y_dot: Vec<f64>, phi: Matrix },
    Slices(Vec<Matrix>),
    Slice(Matrix),
    Component(IcfComponent),
    Failed(String),
}

/// Logical message kinds tallied by the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    PitcLocalSummary,
    IcfLocalSummary,
    IcfSummaryHead,
    IcfSummarySlice,
    IcfGlobalSlice,
    IcfPivotCandidate,
    IcfPivotRow,
    PredictiveComponent,
    GlobalSummaryBroadcast,
    ClusterCenter,
    ClusterCenters,
    ReassignedPoint,
}

impl MessageKind {
    pub const ALL: [MessageKind; 12] = [
        MessageKind::PitcLocalSummary,
        MessageKind::IcfLocalSummary,
        MessageKind::IcfSummaryHead,
        MessageKind::IcfSummarySlice,
        MessageKind::IcfGlobalSlice,
        MessageKind::IcfPivotCandidate,
        MessageKind::IcfPivotRow,
        MessageKind::PredictiveComponent,
        MessageKind::GlobalSummaryBroadcast,
        MessageKind::ClusterCenter,
        MessageKind::ClusterCenters,
        MessageKind::ReassignedPoint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::PitcLocalSummary => "pitc-local-summary",
            MessageKind::IcfLocalSummary => "icf-local-summary",
            MessageKind::IcfSummaryHead => "icf-summary-head",
            MessageKind::IcfSummarySlice => "icf-summary-slice",
            MessageKind::IcfGlobalSlice => "icf-global-slice",
            MessageKind::IcfPivotCandidate => "icf-pivot-candidate",
            MessageKind::IcfPivotRow => "icf-pivot-row",
            MessageKind::PredictiveComponent => "predictive-component",
            MessageKind::GlobalSummaryBroadcast => "global-summary-broadcast",
            MessageKind::ClusterCenter => "cluster-center",
            MessageKind::ClusterCenters => "cluster-centers",
            MessageKind::ReassignedPoint => "reassigned-point",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One logical message as recorded by the master.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerMessage<T> {
    /// Machine index of the sender; `None` for the master.
    pub sender: Option<usize>,
    pub kind: MessageKind,
    pub payload: T,
    pub payload_scalars: usize,
}

fn matrix_len(m: &Matrix) -> usize {
    m.rows() * m.cols()
}

pub(crate) fn prediction_scalars(p: &PredictiveDistribution) -> usize {
    p.mean.len() + p.covariance.as_ref().map_or(p.variances.len(), matrix_len)
}

pub(crate) fn pitc_global_scalars(g: &PitcGlobalSummary) -> usize {
    g.scalar_count()
}

pub(crate) fn icf_global_scalars(g: &IcfGlobalSummary) -> usize {
    g.y_ddot.len() + matrix_len(&g.sigma_ddot) + matrix_len(&g.phi_total)
}

pub(crate) fn icf_head_scalars(y_dot: &[f64], phi: &Matrix) -> usize {
    y_dot.len() + matrix_len(phi)
}

pub(crate) fn slice_scalars(m: &Matrix) -> usize {
    matrix_len(m)
}
