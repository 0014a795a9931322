//! Support-set summaries, the pPITC / pPIC block predictors and the
//! centralized PITC / PIC models they reproduce.
//!
//! Notation in comments: `K = Σ_SS`, `Λ_m = Σ_{D_m D_m | S}`, `r_m = y_m - μ`.
//! A machine's local summary is `(Σ_{S D_m} Λ_m⁻¹ r_m, Σ_{S D_m} Λ_m⁻¹ Σ_{D_m S})`;
//! the global summary adds them up on top of `K`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exact::{Dataset, PredictiveDistribution};
use crate::kernel::{cov_matrix, cov_symmetric, prior_variances, Hyperparameters, InputPoint};
use crate::linalg::{col_dots, row_dots, Cholesky, Matrix};
use crate::partition::{Partition, SupportSet};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PitcLocalSummary {
    pub y_dot: Vec<f64>,
    pub sigma_dot: Matrix,
}

impl PitcLocalSummary {
    pub fn zero(support_size: usize) -> Self {
        Self {
            y_dot: vec![0.0; support_size],
            sigma_dot: Matrix::zeros(support_size, support_size),
        }
    }

    pub fn support_size(&self) -> usize {
        self.y_dot.len()
    }

    /// Number of reals carried, `|S| + |S|²`.
    pub fn scalar_count(&self) -> usize {
        self.y_dot.len() + self.sigma_dot.rows() * self.sigma_dot.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PitcGlobalSummary {
    pub y_ddot: Vec<f64>,
    pub sigma_ddot: Matrix,
}

impl PitcGlobalSummary {
    pub fn scalar_count(&self) -> usize {
        self.y_ddot.len() + self.sigma_ddot.rows() * self.sigma_ddot.cols()
    }
}

struct SupportFactor {
    chol: Cholesky,
}

impl SupportFactor {
    fn new(s: &SupportSet, h: &Hyperparameters) -> Result<Self> {
        Ok(Self {
            chol: Cholesky::factor(&cov_symmetric(s.points(), h)?)?,
        })
    }
}

/// Factor of `Λ_m` plus the whitened cross-covariance and residuals.
struct BlockConditioning {
    chol: Cholesky,
    /// `L_Λ⁻¹ Σ_{D_m S}`, |D_m| × |S|
    w: Matrix,
    /// `L_Λ⁻¹ r_m`
    r: Vec<f64>,
}

impl BlockConditioning {
    fn new(block: &Dataset, s: &SupportSet, sf: &SupportFactor, h: &Hyperparameters) -> Result<Self> {
        let k_ds = cov_matrix(block.inputs(), s.points(), h)?;
        let v = sf.chol.solve_lower(&k_ds.transpose())?;
        let mut cond = cov_symmetric(block.inputs(), h)?;
        cond.sub_assign(&v.gram())?;
        let chol = Cholesky::factor(&cond)?;
        let w = chol.solve_lower(&k_ds)?;
        let r = chol.solve_lower_vec(&block.residuals())?;
        Ok(Self { chol, w, r })
    }

    fn summary(&self) -> Result<PitcLocalSummary> {
        Ok(PitcLocalSummary {
            y_dot: self.w.t_mat_vec(&self.r)?,
            sigma_dot: self.w.gram(),
        })
    }
}

/// Local summary of one machine's block.
///
/// An empty block contributes the zero summary.
pub fn local_summary(block: &Dataset, s: &SupportSet, h: &Hyperparameters) -> Result<PitcLocalSummary> {
    if block.is_empty() {
        return Ok(PitcLocalSummary::zero(s.len()));
    }
    let sf = SupportFactor::new(s, h)?;
    BlockConditioning::new(block, s, &sf, h)?.summary()
}

/// `(Σ_m ẏ_m, K + Σ_m Σ̇_m)`, accumulated in ascending machine order.
pub fn global_summary(locals: &[PitcLocalSummary], s: &SupportSet, h: &Hyperparameters) -> Result<PitcGlobalSummary> {
    let n = s.len();
    let mut y_ddot = vec![0.0; n];
    let mut sigma_ddot = cov_symmetric(s.points(), h)?;
    for l in locals {
        if l.y_dot.len() != n || l.sigma_dot.shape() != (n, n) {
            return Err(Error::ShapeMismatch {
                context: "local summary",
                expected: (n, n),
                actual: l.sigma_dot.shape(),
            });
        }
        for (a, b) in y_ddot.iter_mut().zip(&l.y_dot) {
            *a += b;
        }
        sigma_ddot.add_assign(&l.sigma_dot)?;
    }
    Ok(PitcGlobalSummary { y_ddot, sigma_ddot })
}

fn check_global(global: &PitcGlobalSummary, s: &SupportSet) -> Result<()> {
    let n = s.len();
    if global.y_ddot.len() != n || global.sigma_ddot.shape() != (n, n) {
        return Err(Error::ShapeMismatch {
            context: "global summary",
            expected: (n, n),
            actual: global.sigma_ddot.shape(),
        });
    }
    Ok(())
}

fn finish(
    mean: Vec<f64>,
    query: &[InputPoint],
    h: &Hyperparameters,
    full_cov: bool,
    full: impl FnOnce() -> Result<Matrix>,
    diag: impl FnOnce() -> Result<Vec<f64>>,
) -> Result<PredictiveDistribution> {
    if full_cov {
        Ok(PredictiveDistribution::from_covariance(mean, full()?, true))
    } else {
        let reduction = diag()?;
        let variances = prior_variances(query, h)
            .into_iter()
            .zip(reduction)
            .map(|(p, r)| p - r)
            .collect();
        Ok(PredictiveDistribution {
            mean,
            variances,
            covariance: None,
        })
    }
}

/// pPITC prediction of one query block from the global summary:
/// mean `μ + Σ_US Σ̈⁻¹ ÿ`, covariance `Σ_UU - Σ_US (K⁻¹ - Σ̈⁻¹) Σ_SU`.
pub fn ppitc_predict_block(
    query_block: &[InputPoint],
    s: &SupportSet,
    global: &PitcGlobalSummary,
    prior_mean: f64,
    h: &Hyperparameters,
    full_cov: bool,
) -> Result<PredictiveDistribution> {
    check_global(global, s)?;
    let sf = SupportFactor::new(s, h)?;
    let chol_g = Cholesky::factor(&global.sigma_ddot)?;
    let k_su = cov_matrix(s.points(), query_block, h)?;

    let alpha = chol_g.solve_vec(&global.y_ddot)?;
    let mean: Vec<f64> = k_su.t_mat_vec(&alpha)?.into_iter().map(|v| v + prior_mean).collect();

    let a = sf.chol.solve_lower(&k_su)?;
    let b = chol_g.solve_lower(&k_su)?;
    finish(
        mean,
        query_block,
        h,
        full_cov,
        || {
            let mut cov = cov_symmetric(query_block, h)?;
            cov.sub_assign(&a.gram())?;
            cov.add_assign(&b.gram())?;
            Ok(cov)
        },
        || {
            Ok(col_dots(&a, &a)
                .into_iter()
                .zip(col_dots(&b, &b))
                .map(|(x, y)| x - y)
                .collect())
        },
    )
}

/// pPIC prediction of the query block paired with `block`.
///
/// Besides the global summary this uses the machine's own data through
/// `ẏ_U = Σ_UD Λ⁻¹ r`, `Σ̇_US = Σ_UD Λ⁻¹ Σ_DS` and `Σ̇_UU = Σ_UD Λ⁻¹ Σ_DU`,
/// computed here from the block rather than shipped. With
/// `P = Σ_US K⁻¹` and `Φ = Σ_US + P Σ̇_SS - Σ̇_US`:
///
/// - mean `μ + Φ Σ̈⁻¹ ÿ - P ẏ_S + ẏ_U`
/// - covariance `Σ_UU - (Φ Pᵀ - P Σ̇_SU - Φ Σ̈⁻¹ Φᵀ) - Σ̇_UU`
pub fn ppic_predict_block(
    block: &Dataset,
    query_block: &[InputPoint],
    s: &SupportSet,
    local: &PitcLocalSummary,
    global: &PitcGlobalSummary,
    h: &Hyperparameters,
    full_cov: bool,
) -> Result<PredictiveDistribution> {
    check_global(global, s)?;
    if local.y_dot.len() != s.len() || local.sigma_dot.shape() != (s.len(), s.len()) {
        return Err(Error::ShapeMismatch {
            context: "local summary",
            expected: (s.len(), s.len()),
            actual: local.sigma_dot.shape(),
        });
    }
    let sf = SupportFactor::new(s, h)?;
    let chol_g = Cholesky::factor(&global.sigma_ddot)?;
    let u = query_block.len();
    let ns = s.len();

    let (y_dot_u, sd_us, sd_uu) = if block.is_empty() {
        (vec![0.0; u], Matrix::zeros(u, ns), Matrix::zeros(u, u))
    } else {
        let bc = BlockConditioning::new(block, s, &sf, h)?;
        let z = bc.chol.solve_lower(&cov_matrix(block.inputs(), query_block, h)?)?;
        (z.t_mat_vec(&bc.r)?, z.t_matmul(&bc.w)?, z.gram())
    };

    let k_su = cov_matrix(s.points(), query_block, h)?;
    let p = sf.chol.solve(&k_su)?.transpose();
    let mut phi = k_su.transpose();
    phi.add_assign(&p.matmul(&local.sigma_dot)?)?;
    phi.sub_assign(&sd_us)?;

    let alpha = chol_g.solve_vec(&global.y_ddot)?;
    let summary_term = phi.mat_vec(&alpha)?;
    let local_correction = p.mat_vec(&local.y_dot)?;
    let mean = (0..u)
        .map(|i| block.prior_mean() + summary_term[i] - local_correction[i] + y_dot_u[i])
        .collect();

    let c = chol_g.solve_lower(&phi.transpose())?;
    finish(
        mean,
        query_block,
        h,
        full_cov,
        || {
            let mut cov = cov_symmetric(query_block, h)?;
            cov.sub_assign(&phi.matmul_t(&p)?)?;
            cov.add_assign(&p.matmul_t(&sd_us)?)?;
            cov.add_assign(&c.gram())?;
            cov.sub_assign(&sd_uu)?;
            Ok(cov)
        },
        || {
            let a = row_dots(&phi, &p);
            let b = row_dots(&p, &sd_us);
            let cc = col_dots(&c, &c);
            let dd = sd_uu.diagonal();
            Ok((0..u).map(|i| a[i] - b[i] - cc[i] + dd[i]).collect())
        },
    )
}

fn check_partition(train: &Dataset, partition: &Partition) -> Result<()> {
    if partition.train_len() != train.len() {
        return Err(Error::ShapeMismatch {
            context: "partition coverage",
            expected: (train.len(), 1),
            actual: (partition.train_len(), 1),
        });
    }
    Ok(())
}

/// Dense centralized model shared by PITC and PIC: `Γ_DD + Λ` over the
/// stacked blocks, and `Γ_DU` for the query columns.
struct CentralizedPitc {
    chol_q: Cholesky,
    residuals: Vec<f64>,
    /// Row offsets of each block in the stacked order.
    offsets: Vec<usize>,
}

impl CentralizedPitc {
    fn new(partition: &Partition, sf: &SupportFactor, s: &SupportSet, h: &Hyperparameters) -> Result<(Self, Matrix)> {
        let stacked = partition.stacked_train();
        let k_sd = cov_matrix(s.points(), stacked.inputs(), h)?;
        let v = sf.chol.solve_lower(&k_sd)?;
        // Γ_DD with its diagonal blocks replaced by Σ_{D_m D_m}, i.e. Γ_DD + Λ.
        let mut q = v.gram();
        let mut offsets = Vec::with_capacity(partition.num_blocks() + 1);
        let mut off = 0;
        for b in partition.blocks() {
            offsets.push(off);
            let kb = cov_symmetric(b.inputs(), h)?;
            for i in 0..b.len() {
                for j in 0..b.len() {
                    q[(off + i, off + j)] = kb[(i, j)];
                }
            }
            off += b.len();
        }
        offsets.push(off);
        let chol_q = Cholesky::factor(&q)?;
        Ok((
            Self {
                chol_q,
                residuals: stacked.residuals(),
                offsets,
            },
            v,
        ))
    }

    fn predict(
        &self,
        cross: &Matrix,
        query: &[InputPoint],
        prior_mean: f64,
        h: &Hyperparameters,
        full_cov: bool,
    ) -> Result<PredictiveDistribution> {
        let alpha = self.chol_q.solve_vec(&self.residuals)?;
        let mean = cross.t_mat_vec(&alpha)?.into_iter().map(|v| v + prior_mean).collect();
        let w = self.chol_q.solve_lower(cross)?;
        finish(
            mean,
            query,
            h,
            full_cov,
            || {
                let mut cov = cov_symmetric(query, h)?;
                cov.sub_assign(&w.gram())?;
                Ok(cov)
            },
            || Ok(col_dots(&w, &w)),
        )
    }
}

/// Centralized PITC: mean `μ + Γ_UD (Γ_DD + Λ)⁻¹ r`, covariance
/// `Σ_UU - Γ_UD (Γ_DD + Λ)⁻¹ Γ_DU`, with `Γ_AB = Σ_AS K⁻¹ Σ_SB` and `Λ`
/// the block diagonal of `Σ_DD|S` over the partition's blocks.
pub fn centralized_pitc(
    train: &Dataset,
    partition: &Partition,
    query: &[InputPoint],
    s: &SupportSet,
    h: &Hyperparameters,
    full_cov: bool,
) -> Result<PredictiveDistribution> {
    check_partition(train, partition)?;
    let sf = SupportFactor::new(s, h)?;
    let (model, v) = CentralizedPitc::new(partition, &sf, s, h)?;
    let a = sf.chol.solve_lower(&cov_matrix(s.points(), query, h)?)?;
    let gamma_du = v.t_matmul(&a)?;
    model.predict(&gamma_du, query, train.prior_mean(), h, full_cov)
}

/// Centralized PIC: as PITC but each query block keeps its exact covariance
/// with the training block it is paired with (`Γ̃_{U_i D_m} = Σ_{U_i D_m}`
/// when `i = m`). Results come back in the original query order.
pub fn centralized_pic(
    train: &Dataset,
    partition: &Partition,
    query: &[InputPoint],
    s: &SupportSet,
    h: &Hyperparameters,
    full_cov: bool,
) -> Result<PredictiveDistribution> {
    centralized_pic_impl(train, partition, query, s, h, full_cov, true)
}

pub(crate) fn centralized_pic_impl(
    train: &Dataset,
    partition: &Partition,
    query: &[InputPoint],
    s: &SupportSet,
    h: &Hyperparameters,
    full_cov: bool,
    local_blocks: bool,
) -> Result<PredictiveDistribution> {
    check_partition(train, partition)?;
    if partition.query_len() != query.len() {
        return Err(Error::ShapeMismatch {
            context: "partition query coverage",
            expected: (query.len(), 1),
            actual: (partition.query_len(), 1),
        });
    }
    let sf = SupportFactor::new(s, h)?;
    let (model, v) = CentralizedPitc::new(partition, &sf, s, h)?;
    let stacked_query: Vec<InputPoint> = partition.query_blocks().iter().flatten().cloned().collect();
    let a = sf.chol.solve_lower(&cov_matrix(s.points(), &stacked_query, h)?)?;
    let mut cross = v.t_matmul(&a)?;
    if local_blocks {
        let mut qoff = 0;
        for (m, (b, qb)) in partition.blocks().iter().zip(partition.query_blocks()).enumerate() {
            let k = cov_matrix(b.inputs(), qb, h)?;
            let doff = model.offsets[m];
            for i in 0..b.len() {
                for j in 0..qb.len() {
                    cross[(doff + i, qoff + j)] = k[(i, j)];
                }
            }
            qoff += qb.len();
        }
    }
    let stacked = model.predict(&cross, &stacked_query, train.prior_mean(), h, full_cov)?;

    // Undo the block ordering of the query.
    let order: Vec<usize> = partition.query_index().iter().flatten().copied().collect();
    let n = query.len();
    let mut mean = vec![0.0; n];
    let mut variances = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        mean[i] = stacked.mean[k];
        variances[i] = stacked.variances[k];
    }
    let covariance = stacked.covariance.map(|c| {
        let mut out = Matrix::zeros(n, n);
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                out[(i, j)] = c[(a, b)];
            }
        }
        out
    });
    Ok(PredictiveDistribution {
        mean,
        variances,
        covariance,
    })
}
