//! Per-machine state and the command handler every transport drives.

use std::ops::Range;

use pgpr_core::icf::{
    icf_global_slice, icf_local_summary, icf_predictive_component, IcfFactorBlock, IcfLocalSummary, IcfWorker,
};
use pgpr_core::partition::draw_cluster_center;
use pgpr_core::pitc::{local_summary, ppic_predict_block, ppitc_predict_block, PitcLocalSummary};
use pgpr_core::{Error, Result};

use super::protocol::{Command, Reply, WorkerSetup};

/// One worker's view of the run. It only ever sees its own block, the
/// shared support set and whatever the master broadcasts.
#[derive(Debug)]
pub struct WorkerState {
    index: usize,
    setup: Option<WorkerSetup>,
    pitc_local: Option<PitcLocalSummary>,
    icf: Option<IcfWorker>,
    factor: Option<IcfFactorBlock>,
    icf_local: Option<IcfLocalSummary>,
}

impl WorkerState {
    pub fn new(index: usize) -> Self {
        Self {
            index,
            setup: None,
            pitc_local: None,
            icf: None,
            factor: None,
            icf_local: None,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Runs one command. Errors become `Reply::Failed` so the master can
    /// abort the run naming this machine.
    pub fn handle(&mut self, cmd: Command) -> Reply {
        match self.dispatch(cmd) {
            Ok(r) => r,
            Err(e) => Reply::Failed(e.to_string()),
        }
    }

    fn setup(&self) -> Result<&WorkerSetup> {
        self.setup
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("worker has not been set up".into()))
    }

    fn support(&self) -> Result<&pgpr_core::SupportSet> {
        self.setup()?
            .support
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("no support set was distributed".into()))
    }

    fn pitc_local(&mut self) -> Result<&PitcLocalSummary> {
        if self.pitc_local.is_none() {
            let st = self.setup()?;
            let s = self.support()?;
            self.pitc_local = Some(local_summary(&st.block, s, &st.hyper)?);
        }
        Ok(self.pitc_local.as_ref().expect("just computed"))
    }

    fn icf_worker(&mut self) -> Result<&mut IcfWorker> {
        self.icf
            .as_mut()
            .ok_or_else(|| Error::InvalidArgument("factorization has not begun".into()))
    }

    fn factor(&mut self) -> Result<&IcfFactorBlock> {
        if self.factor.is_none() {
            let w = self
                .icf
                .take()
                .ok_or_else(|| Error::InvalidArgument("factorization has not begun".into()))?;
            self.factor = Some(w.into_block());
        }
        Ok(self.factor.as_ref().expect("just built"))
    }

    fn icf_local(&mut self) -> Result<&IcfLocalSummary> {
        if self.icf_local.is_none() {
            self.factor()?;
            let st = self.setup()?;
            let f = self.factor.as_ref().expect("built above");
            self.icf_local = Some(icf_local_summary(&st.block, f, &st.query, &st.hyper)?);
        }
        Ok(self.icf_local.as_ref().expect("just computed"))
    }

    fn dispatch(&mut self, cmd: Command) -> Result<Reply> {
        match cmd {
            Command::Setup(setup) => {
                *self = WorkerState::new(self.index);
                self.setup = Some(*setup);
                Ok(Reply::Ack)
            }
            Command::ClusterCenter { seed } => {
                let st = self.setup()?;
                Ok(Reply::Center(draw_cluster_center(&st.block, seed, self.index)?))
            }
            Command::PitcSummary => Ok(Reply::PitcLocal(self.pitc_local()?.clone())),
            Command::PpitcPredict { global } => {
                let st = self.setup()?;
                let p = ppitc_predict_block(
                    &st.query_block,
                    self.support()?,
                    &global,
                    st.block.prior_mean(),
                    &st.hyper,
                    st.full_cov,
                )?;
                Ok(Reply::Prediction(p))
            }
            Command::PpicPredict { global } => {
                let local = self.pitc_local()?.clone();
                let st = self.setup()?;
                let p = ppic_predict_block(
                    &st.block,
                    &st.query_block,
                    self.support()?,
                    &local,
                    &global,
                    &st.hyper,
                    st.full_cov,
                )?;
                Ok(Reply::Prediction(p))
            }
            Command::IcfBegin { rank } => {
                let st = self.setup()?;
                self.icf = Some(IcfWorker::new(st.block.inputs().to_vec(), rank, &st.hyper)?);
                self.factor = None;
                self.icf_local = None;
                Ok(Reply::Ack)
            }
            Command::IcfCandidate => Ok(Reply::Candidate(self.icf_worker()?.best_candidate()?)),
            Command::IcfPivotRow { local_index } => Ok(Reply::PivotRow(self.icf_worker()?.pivot_row(local_index)?)),
            Command::IcfApplyPivot { row } => {
                let h = self.setup()?.hyper.clone();
                self.icf_worker()?.apply_pivot(&row, &h)?;
                Ok(Reply::Ack)
            }
            Command::IcfFactorBlock => Ok(Reply::Factor(self.factor()?.clone())),
            Command::IcfSummary => Ok(Reply::IcfLocal(self.icf_local()?.clone())),
            Command::IcfSummaryHead => {
                let l = self.icf_local()?;
                Ok(Reply::IcfHead {
                    y_dot: l.y_dot.clone(),
                    phi: l.phi.clone(),
                })
            }
            Command::IcfSummarySlices { bounds } => {
                let l = self.icf_local()?;
                let u = l.sigma_dot.cols();
                let ranges: Vec<Range<usize>> = bounds.iter().map(|&(a, b)| a..b).collect();
                pgpr_core::icf::check_slice_bounds(&ranges, u)?;
                Ok(Reply::Slices(
                    ranges.iter().map(|r| l.sigma_dot.column_range(r.start, r.end)).collect(),
                ))
            }
            Command::IcfGlobalSlice { phi_total, slices } => Ok(Reply::Slice(icf_global_slice(&phi_total, &slices)?)),
            Command::IcfComponent { global } => {
                let local = self.icf_local()?.clone();
                let st = self.setup()?;
                Ok(Reply::Component(icf_predictive_component(
                    &st.block,
                    &local,
                    &global,
                    &st.query,
                    &st.hyper,
                    st.full_cov,
                )?))
            }
            Command::Shutdown => Ok(Reply::Ack),
        }
    }
}
