//! Retained summaries for online learning: new data arrives as new blocks.

use std::collections::BTreeMap;

use pgpr_core::pitc::{global_summary, local_summary, ppic_predict_block, ppitc_predict_block};
use pgpr_core::pitc::{PitcGlobalSummary, PitcLocalSummary};
use pgpr_core::{Dataset, Error, Hyperparameters, InputPoint, PredictiveDistribution, Result, SupportSet};

/// Local summary per block, the running global summary, and which block
/// each training id lives in.
#[derive(Debug, Clone)]
pub struct SummaryStore {
    support: SupportSet,
    hyper: Hyperparameters,
    blocks: Vec<Dataset>,
    locals: Vec<PitcLocalSummary>,
    global: PitcGlobalSummary,
    registry: BTreeMap<u64, usize>,
}

impl SummaryStore {
    /// A store with no data: the global summary is `(0, Σ_SS)`.
    pub fn new(support: SupportSet, hyper: Hyperparameters) -> Result<Self> {
        let global = global_summary(&[], &support, &hyper)?;
        Ok(Self {
            support,
            hyper,
            blocks: Vec::new(),
            locals: Vec::new(),
            global,
            registry: BTreeMap::new(),
        })
    }

    pub fn with_blocks(blocks: Vec<Dataset>, support: SupportSet, hyper: Hyperparameters) -> Result<Self> {
        let mut store = Self::new(support, hyper)?;
        for b in blocks {
            store.assimilate(b)?;
        }
        Ok(store)
    }

    pub fn blocks(&self) -> &[Dataset] {
        &self.blocks
    }

    pub fn locals(&self) -> &[PitcLocalSummary] {
        &self.locals
    }

    pub fn global(&self) -> &PitcGlobalSummary {
        &self.global
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    /// Block holding training id `id`.
    pub fn block_of(&self, id: u64) -> Option<usize> {
        self.registry.get(&id).copied()
    }

    /// Adds `block` as a new machine's data. Only the new block's local
    /// summary is computed; it is added into the global summary after all
    /// earlier blocks, the same order a fresh reduction would use. An empty
    /// block leaves the store unchanged.
    pub fn assimilate(&mut self, block: Dataset) -> Result<()> {
        if block.is_empty() {
            return Ok(());
        }
        if let Some(p) = block.inputs().iter().find(|p| self.registry.contains_key(&p.id)) {
            return Err(Error::DuplicateId(p.id));
        }
        if let Some(first) = self.blocks.first() {
            if first.prior_mean() != block.prior_mean() {
                return Err(Error::InvalidArgument(format!(
                    "block prior mean {} differs from the store's {}",
                    block.prior_mean(),
                    first.prior_mean()
                )));
            }
        }
        let local = local_summary(&block, &self.support, &self.hyper)?;
        for (a, b) in self.global.y_ddot.iter_mut().zip(&local.y_dot) {
            *a += b;
        }
        self.global.sigma_ddot.add_assign(&local.sigma_dot)?;
        let index = self.blocks.len();
        for p in block.inputs() {
            self.registry.insert(p.id, index);
        }
        self.blocks.push(block);
        self.locals.push(local);
        Ok(())
    }

    /// Largest deviation between the running global summary and one
    /// recomputed from the retained local summaries.
    pub fn verify(&self) -> Result<f64> {
        let fresh = global_summary(&self.locals, &self.support, &self.hyper)?;
        let y = self
            .global
            .y_ddot
            .iter()
            .zip(&fresh.y_ddot)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let mut d = self.global.sigma_ddot.clone();
        d.sub_assign(&fresh.sigma_ddot)?;
        Ok(y.max(d.max_abs()))
    }

    fn prior_mean(&self) -> f64 {
        self.blocks.first().map_or(0.0, Dataset::prior_mean)
    }

    /// pPITC prediction from the current global summary.
    pub fn predict_ppitc(&self, query: &[InputPoint]) -> Result<PredictiveDistribution> {
        ppitc_predict_block(query, &self.support, &self.global, self.prior_mean(), &self.hyper, false)
    }

    /// pPIC prediction; `query_blocks[m]` is paired with block m.
    pub fn predict_ppic(&self, query_blocks: &[Vec<InputPoint>]) -> Result<Vec<PredictiveDistribution>> {
        if query_blocks.len() != self.blocks.len() {
            return Err(Error::InvalidArgument(format!(
                "{} query blocks for {} training blocks",
                query_blocks.len(),
                self.blocks.len()
            )));
        }
        self.blocks
            .iter()
            .zip(&self.locals)
            .zip(query_blocks)
            .map(|((b, l), q)| ppic_predict_block(b, q, &self.support, l, &self.global, &self.hyper, false))
            .collect()
    }
}
