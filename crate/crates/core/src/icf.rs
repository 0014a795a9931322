//! Incomplete Cholesky factorization and the pICF-based predictor.
//!
//! The factor `F` (R × |D|) approximates the noise-free kernel matrix,
//! `Σ_DD ≈ FᵀF + σ_n² I`. Pivots are chosen greedily by largest diagonal
//! residual, ties to the lowest point id, so the serial and block-distributed
//! factorizations make identical choices and produce bitwise-identical
//! factors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::exact::{Dataset, PredictiveDistribution};
use crate::kernel::{check_points, cov_matrix, cov_symmetric, prior_variances, Hyperparameters, InputPoint};
use crate::linalg::{col_dots, Cholesky, Matrix};
use crate::partition::Partition;

/// Stop pivoting once the largest residual drops below this times `σ_s²`.
pub const TERMINATION_TOL: f64 = 1e-12;
/// Residuals below `-BREAKDOWN_TOL · σ_s²` abort the factorization.
pub const BREAKDOWN_TOL: f64 = 1e-9;

/// Full factor with columns in the order of the inputs it was built from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IcfFactor {
    pub entries: Matrix,
    pub pivot_ids: Vec<u64>,
    /// Rows past this index are zero padding after early termination.
    pub effective_rank: usize,
}

impl IcfFactor {
    pub fn rank(&self) -> usize {
        self.entries.rows()
    }
}

/// Machine m's columns `F_m` of the factor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IcfFactorBlock {
    pub entries: Matrix,
    pub pivot_ids: Vec<u64>,
    pub effective_rank: usize,
}

impl IcfFactorBlock {
    pub fn rank(&self) -> usize {
        self.entries.rows()
    }

    pub fn block_cols(&self) -> usize {
        self.entries.cols()
    }
}

fn check_factor_args(n: usize, rank: usize, h: &Hyperparameters) -> Result<()> {
    if rank == 0 || rank > n {
        return Err(Error::InvalidArgument(format!("rank {rank} must be in 1..={n}")));
    }
    if !(h.noise_variance() > 0.0) {
        return Err(Error::InvalidArgument(
            "incomplete Cholesky needs a positive noise variance".into(),
        ));
    }
    Ok(())
}

fn beats(residual: f64, id: u64, best: Option<(f64, u64)>) -> bool {
    match best {
        None => true,
        Some((r, i)) => residual > r || (residual == r && id < i),
    }
}

/// Greedy pivoted incomplete Cholesky of `K = Σ_DD - σ_n² I`.
pub fn icf_factor_serial(inputs: &[InputPoint], rank: usize, h: &Hyperparameters) -> Result<IcfFactor> {
    check_factor_args(inputs.len(), rank, h)?;
    check_points(inputs, h)?;
    let ids: Vec<u64> = inputs.iter().map(|p| p.id).collect();
    let sv = h.signal_variance();
    greedy_factor(&ids, vec![sv; ids.len()], sv, rank, |p, j| {
        h.signal(&inputs[p].coords, &inputs[j].coords)
    })
}

/// The same greedy factorization applied to an explicit symmetric PSD
/// matrix, with tolerances scaled by its largest diagonal entry.
pub fn icf_factor_matrix(k: &Matrix, ids: &[u64], rank: usize) -> Result<IcfFactor> {
    let n = k.rows();
    if k.cols() != n || ids.len() != n {
        return Err(Error::ShapeMismatch {
            context: "icf matrix",
            expected: (ids.len(), ids.len()),
            actual: k.shape(),
        });
    }
    if rank == 0 || rank > n {
        return Err(Error::InvalidArgument(format!("rank {rank} must be in 1..={n}")));
    }
    let diag = k.diagonal();
    let scale = diag.iter().fold(0.0_f64, |m, d| m.max(*d));
    greedy_factor(ids, diag, scale, rank, |p, j| k[(p, j)])
}

fn greedy_factor(
    ids: &[u64],
    mut residual: Vec<f64>,
    scale: f64,
    rank: usize,
    entry: impl Fn(usize, usize) -> f64,
) -> Result<IcfFactor> {
    let n = ids.len();
    let mut f = Matrix::zeros(rank, n);
    let mut pivoted = vec![false; n];
    let mut pivot_ids = Vec::with_capacity(rank);

    for step in 0..rank {
        let mut best: Option<(f64, u64)> = None;
        let mut best_j = 0;
        for j in 0..n {
            if pivoted[j] {
                continue;
            }
            if residual[j] < -BREAKDOWN_TOL * scale {
                return Err(Error::FactorBreakdown {
                    step,
                    residual: residual[j],
                });
            }
            if beats(residual[j], ids[j], best) {
                best = Some((residual[j], ids[j]));
                best_j = j;
            }
        }
        match best {
            Some((r, _)) if r >= TERMINATION_TOL * scale => {}
            _ => break,
        }
        let p = best_j;
        let piv = libm::sqrt(residual[p]);
        f[(step, p)] = piv;
        pivoted[p] = true;
        residual[p] = 0.0;
        for j in 0..n {
            if pivoted[j] {
                continue;
            }
            let mut s = entry(p, j);
            for t in 0..step {
                s -= f[(t, p)] * f[(t, j)];
            }
            let e = s / piv;
            f[(step, j)] = e;
            residual[j] -= e * e;
        }
        pivot_ids.push(ids[p]);
    }
    let effective_rank = pivot_ids.len();
    Ok(IcfFactor {
        entries: f,
        pivot_ids,
        effective_rank,
    })
}

/// A worker's best remaining pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PivotCandidate {
    pub residual: f64,
    pub id: u64,
    pub local_index: usize,
}

/// What the winning worker broadcasts: the pivot input and its column of
/// the factor so far, `F[0..step, p]`, plus the new diagonal `√residual`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PivotRow {
    pub id: u64,
    pub coords: Vec<f64>,
    pub column: Vec<f64>,
    pub pivot: f64,
}

impl PivotRow {
    /// Reals carried: coordinates, factor column and the pivot value.
    pub fn scalar_count(&self) -> usize {
        self.coords.len() + self.column.len() + 1
    }
}

/// One machine's share of the distributed factorization: its columns of
/// `F` and of the diagonal residual.
#[derive(Debug, Clone)]
pub struct IcfWorker {
    inputs: Vec<InputPoint>,
    rows: Matrix,
    residual: Vec<f64>,
    pivoted: Vec<bool>,
    step: usize,
    pivot_ids: Vec<u64>,
    signal_variance: f64,
}

impl IcfWorker {
    pub fn new(inputs: Vec<InputPoint>, rank: usize, h: &Hyperparameters) -> Result<Self> {
        check_points(&inputs, h)?;
        let n = inputs.len();
        Ok(Self {
            rows: Matrix::zeros(rank, n),
            residual: vec![h.signal_variance(); n],
            pivoted: vec![false; n],
            inputs,
            step: 0,
            pivot_ids: Vec::with_capacity(rank),
            signal_variance: h.signal_variance(),
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Largest residual among this worker's unpivoted columns.
    pub fn best_candidate(&self) -> Result<Option<PivotCandidate>> {
        let mut best: Option<(f64, u64)> = None;
        let mut best_j = 0;
        for j in 0..self.inputs.len() {
            if self.pivoted[j] {
                continue;
            }
            let r = self.residual[j];
            if r < -BREAKDOWN_TOL * self.signal_variance {
                return Err(Error::FactorBreakdown {
                    step: self.step,
                    residual: r,
                });
            }
            if beats(r, self.inputs[j].id, best) {
                best = Some((r, self.inputs[j].id));
                best_j = j;
            }
        }
        Ok(best.map(|(residual, id)| PivotCandidate {
            residual,
            id,
            local_index: best_j,
        }))
    }

    /// Broadcast payload for a pivot this worker owns.
    pub fn pivot_row(&self, local_index: usize) -> Result<PivotRow> {
        if local_index >= self.inputs.len() || self.pivoted[local_index] {
            return Err(Error::InvalidArgument(format!(
                "column {local_index} is not an available pivot"
            )));
        }
        let p = &self.inputs[local_index];
        Ok(PivotRow {
            id: p.id,
            coords: p.coords.clone(),
            column: (0..self.step).map(|t| self.rows[(t, local_index)]).collect(),
            pivot: libm::sqrt(self.residual[local_index]),
        })
    }

    /// Fills row `step` of this worker's columns from the broadcast pivot.
    pub fn apply_pivot(&mut self, row: &PivotRow, h: &Hyperparameters) -> Result<()> {
        let step = self.step;
        if step >= self.rows.rows() {
            return Err(Error::InvalidArgument("factor already has full rank".into()));
        }
        if row.column.len() != step {
            return Err(Error::ShapeMismatch {
                context: "pivot row",
                expected: (step, 1),
                actual: (row.column.len(), 1),
            });
        }
        for j in 0..self.inputs.len() {
            if self.pivoted[j] {
                continue;
            }
            if self.inputs[j].id == row.id {
                self.rows[(step, j)] = row.pivot;
                self.pivoted[j] = true;
                self.residual[j] = 0.0;
                continue;
            }
            let mut s = h.signal(&row.coords, &self.inputs[j].coords);
            for t in 0..step {
                s -= row.column[t] * self.rows[(t, j)];
            }
            let e = s / row.pivot;
            self.rows[(step, j)] = e;
            self.residual[j] -= e * e;
        }
        self.pivot_ids.push(row.id);
        self.step += 1;
        Ok(())
    }

    pub fn into_block(self) -> IcfFactorBlock {
        IcfFactorBlock {
            entries: self.rows,
            effective_rank: self.step,
            pivot_ids: self.pivot_ids,
        }
    }
}

/// Max-reduction over the workers' candidates: largest residual, ties to
/// the lowest id. Returns the winning worker's index and candidate.
pub fn reduce_candidates(candidates: &[Option<PivotCandidate>]) -> Option<(usize, PivotCandidate)> {
    let mut best: Option<(usize, PivotCandidate)> = None;
    for (m, c) in candidates.iter().enumerate() {
        let Some(c) = c else { continue };
        if beats(c.residual, c.id, best.map(|(_, b)| (b.residual, b.id))) {
            best = Some((m, *c));
        }
    }
    best
}

/// Whether a reduced candidate is still worth pivoting on.
pub fn should_pivot(candidate: Option<&PivotCandidate>, h: &Hyperparameters) -> bool {
    candidate.is_some_and(|c| c.residual >= TERMINATION_TOL * h.signal_variance())
}

/// Output of [`icf_factor_distributed`] with its collective counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedFactor {
    pub blocks: Vec<IcfFactorBlock>,
    pub reductions: usize,
    pub broadcasts: usize,
}

/// Block-distributed factorization: each pivot step is a max-reduction of
/// the workers' best residuals followed by a broadcast of the pivot row.
/// A reduction that finds nothing above tolerance ends the loop without a
/// broadcast.
pub fn icf_factor_distributed(partition: &Partition, rank: usize, h: &Hyperparameters) -> Result<DistributedFactor> {
    check_factor_args(partition.train_len(), rank, h)?;
    let mut workers = partition
        .blocks()
        .iter()
        .map(|b| IcfWorker::new(b.inputs().to_vec(), rank, h))
        .collect::<Result<Vec<_>>>()?;
    let mut reductions = 0;
    let mut broadcasts = 0;
    for _ in 0..rank {
        let candidates = workers
            .iter()
            .map(IcfWorker::best_candidate)
            .collect::<Result<Vec<_>>>()?;
        reductions += 1;
        let winner = reduce_candidates(&candidates);
        if !should_pivot(winner.as_ref().map(|(_, c)| c), h) {
            break;
        }
        let (m, c) = winner.expect("checked above");
        let row = workers[m].pivot_row(c.local_index)?;
        broadcasts += 1;
        for w in &mut workers {
            w.apply_pivot(&row, h)?;
        }
    }
    Ok(DistributedFactor {
        blocks: workers.into_iter().map(IcfWorker::into_block).collect(),
        reductions,
        broadcasts,
    })
}

/// Reassembles the blocks into one factor with columns in the caller's
/// training order.
pub fn stack_factor_blocks(blocks: &[IcfFactorBlock], partition: &Partition) -> Result<IcfFactor> {
    if blocks.len() != partition.num_blocks() {
        return Err(Error::ShapeMismatch {
            context: "factor blocks",
            expected: (partition.num_blocks(), 1),
            actual: (blocks.len(), 1),
        });
    }
    let rank = blocks.first().map_or(0, IcfFactorBlock::rank);
    let n = partition.train_len();
    let mut f = Matrix::zeros(rank, n);
    for (b, idx) in blocks.iter().zip(partition.train_index()) {
        if b.rank() != rank || b.block_cols() != idx.len() {
            return Err(Error::ShapeMismatch {
                context: "factor block",
                expected: (rank, idx.len()),
                actual: b.entries.shape(),
            });
        }
        for t in 0..rank {
            for (k, &j) in idx.iter().enumerate() {
                f[(t, j)] = b.entries[(t, k)];
            }
        }
    }
    let first = blocks.first();
    Ok(IcfFactor {
        entries: f,
        pivot_ids: first.map(|b| b.pivot_ids.clone()).unwrap_or_default(),
        effective_rank: first.map_or(0, |b| b.effective_rank),
    })
}

/// `(F_m r_m, F_m Σ_{D_m U}, F_m F_mᵀ)`
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IcfLocalSummary {
    pub y_dot: Vec<f64>,
    pub sigma_dot: Matrix,
    pub phi: Matrix,
}

impl IcfLocalSummary {
    /// `R + R·|U| + R²`
    pub fn scalar_count(&self) -> usize {
        self.y_dot.len() + self.sigma_dot.rows() * self.sigma_dot.cols() + self.phi.rows() * self.phi.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IcfGlobalSummary {
    pub y_ddot: Vec<f64>,
    pub sigma_ddot: Matrix,
    pub phi_total: Matrix,
}

pub fn icf_local_summary(
    block: &Dataset,
    factor: &IcfFactorBlock,
    query: &[InputPoint],
    h: &Hyperparameters,
) -> Result<IcfLocalSummary> {
    if factor.block_cols() != block.len() {
        return Err(Error::ShapeMismatch {
            context: "factor block columns",
            expected: (factor.rank(), block.len()),
            actual: factor.entries.shape(),
        });
    }
    let f = &factor.entries;
    Ok(IcfLocalSummary {
        y_dot: f.mat_vec(&block.residuals())?,
        sigma_dot: f.matmul(&cov_matrix(block.inputs(), query, h)?)?,
        phi: f.outer_gram(),
    })
}

fn check_noise(h: &Hyperparameters) -> Result<()> {
    if !(h.noise_variance() > 0.0) {
        return Err(Error::InvalidArgument(
            "the pICF predictor needs a positive noise variance".into(),
        ));
    }
    Ok(())
}

/// `Φ = I + σ_n⁻² Σ_m Φ_m`, summed in machine order.
pub fn icf_phi_total<'a>(phis: impl IntoIterator<Item = &'a Matrix>, rank: usize, h: &Hyperparameters) -> Result<Matrix> {
    check_noise(h)?;
    let mut sum = Matrix::zeros(rank, rank);
    for p in phis {
        sum.add_assign(p)?;
    }
    sum.scale(1.0 / h.noise_variance());
    sum.add_to_diagonal(1.0);
    Ok(sum)
}

fn sum_vectors<'a>(vs: impl IntoIterator<Item = &'a [f64]>, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    for v in vs {
        if v.len() != n {
            return Err(Error::ShapeMismatch {
                context: "summary vector",
                expected: (n, 1),
                actual: (v.len(), 1),
            });
        }
        for (a, b) in out.iter_mut().zip(v) {
            *a += b;
        }
    }
    Ok(out)
}

/// `(Φ, ÿ)` from the per-machine `(ẏ_m, Φ_m)`: everything in the global
/// summary except `Σ̈`.
pub fn icf_global_head<'a>(
    heads: impl IntoIterator<Item = (&'a [f64], &'a Matrix)>,
    rank: usize,
    h: &Hyperparameters,
) -> Result<(Matrix, Vec<f64>)> {
    let (ys, phis): (Vec<&[f64]>, Vec<&Matrix>) = heads.into_iter().unzip();
    let phi_total = icf_phi_total(phis, rank, h)?;
    let y_sum = sum_vectors(ys, rank)?;
    let y_ddot = Cholesky::factor(&phi_total)?.solve_vec(&y_sum)?;
    Ok((phi_total, y_ddot))
}

/// `ÿ = Φ⁻¹ Σ ẏ_m`, `Σ̈ = Φ⁻¹ Σ Σ̇_m`.
pub fn icf_global_summary(locals: &[IcfLocalSummary], h: &Hyperparameters) -> Result<IcfGlobalSummary> {
    let first = locals
        .first()
        .ok_or_else(|| Error::InvalidArgument("no local summaries".into()))?;
    let rank = first.y_dot.len();
    let u = first.sigma_dot.cols();
    let (phi_total, y_ddot) = icf_global_head(locals.iter().map(|l| (l.y_dot.as_slice(), &l.phi)), rank, h)?;
    let mut s_sum = Matrix::zeros(rank, u);
    for l in locals {
        s_sum.add_assign(&l.sigma_dot)?;
    }
    Ok(IcfGlobalSummary {
        y_ddot,
        sigma_ddot: Cholesky::factor(&phi_total)?.solve(&s_sum)?,
        phi_total,
    })
}

/// One query slice of `Σ̈`: `Φ⁻¹ Σ_m Σ̇_m^i`, as computed by worker i.
pub fn icf_global_slice(phi_total: &Matrix, slices: &[Matrix]) -> Result<Matrix> {
    let rank = phi_total.rows();
    let cols = slices.first().map_or(0, Matrix::cols);
    let mut sum = Matrix::zeros(rank, cols);
    for s in slices {
        sum.add_assign(s)?;
    }
    Cholesky::factor(phi_total)?.solve(&sum)
}

/// Global summary with `Σ̈` computed slice by slice over a partition of the
/// query columns. `bounds` must tile `0..|U|` in order; empty ranges give
/// zero-column slices.
pub fn icf_global_summary_partitioned(
    locals: &[IcfLocalSummary],
    bounds: &[Range<usize>],
    h: &Hyperparameters,
) -> Result<IcfGlobalSummary> {
    let first = locals
        .first()
        .ok_or_else(|| Error::InvalidArgument("no local summaries".into()))?;
    let rank = first.y_dot.len();
    let u = first.sigma_dot.cols();
    check_slice_bounds(bounds, u)?;
    let (phi_total, y_ddot) = icf_global_head(locals.iter().map(|l| (l.y_dot.as_slice(), &l.phi)), rank, h)?;
    let pieces = bounds
        .iter()
        .map(|r| {
            let slices: Vec<Matrix> = locals
                .iter()
                .map(|l| l.sigma_dot.column_range(r.start, r.end))
                .collect();
            icf_global_slice(&phi_total, &slices)
        })
        .collect::<Result<Vec<_>>>()?;
    let sigma_ddot = if pieces.is_empty() {
        Matrix::zeros(rank, 0)
    } else {
        Matrix::hconcat(&pieces)?
    };
    Ok(IcfGlobalSummary {
        y_ddot,
        sigma_ddot,
        phi_total,
    })
}

/// Checks that `bounds` are contiguous and cover `0..total`.
pub fn check_slice_bounds(bounds: &[Range<usize>], total: usize) -> Result<()> {
    let mut next = 0;
    for r in bounds {
        if r.start != next || r.end < r.start {
            return Err(Error::InvalidArgument(format!(
                "query slice {r:?} does not continue at {next}"
            )));
        }
        next = r.end;
    }
    if next != total {
        return Err(Error::InvalidArgument(format!(
            "query slices cover {next} of {total} columns"
        )));
    }
    Ok(())
}

/// Contiguous near-equal slices of `0..n` for `parts` workers.
pub fn even_slices(n: usize, parts: usize) -> Vec<Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Machine m's additive share of the predictive mean and covariance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IcfComponent {
    pub mean: Vec<f64>,
    /// Diagonal of the covariance share.
    pub variances: Vec<f64>,
    pub covariance: Option<Matrix>,
}

impl IcfComponent {
    pub fn scalar_count(&self) -> usize {
        self.mean.len()
            + match &self.covariance {
                Some(c) => c.rows() * c.cols(),
                None => self.variances.len(),
            }
    }
}

/// Mean share `σ_n⁻² Σ_{UD_m} r_m - σ_n⁻⁴ Σ̇_mᵀ ÿ` and covariance share
/// `σ_n⁻² Σ_{UD_m} Σ_{D_mU} - σ_n⁻⁴ Σ̇_mᵀ Σ̈`.
pub fn icf_predictive_component(
    block: &Dataset,
    local: &IcfLocalSummary,
    global: &IcfGlobalSummary,
    query: &[InputPoint],
    h: &Hyperparameters,
    full_cov: bool,
) -> Result<IcfComponent> {
    check_noise(h)?;
    if local.sigma_dot.shape() != global.sigma_ddot.shape() || local.sigma_dot.cols() != query.len() {
        return Err(Error::ShapeMismatch {
            context: "predictive component",
            expected: global.sigma_ddot.shape(),
            actual: local.sigma_dot.shape(),
        });
    }
    let inv_n = 1.0 / h.noise_variance();
    let inv_n2 = inv_n * inv_n;
    let k_du = cov_matrix(block.inputs(), query, h)?;
    let data_term = k_du.t_mat_vec(&block.residuals())?;
    let corr = local.sigma_dot.t_mat_vec(&global.y_ddot)?;
    let mean = data_term
        .iter()
        .zip(&corr)
        .map(|(a, b)| inv_n * a - inv_n2 * b)
        .collect();

    if full_cov {
        let mut a = k_du.gram();
        a.scale(inv_n);
        let mut b = local.sigma_dot.t_matmul(&global.sigma_ddot)?;
        b.scale(inv_n2);
        a.sub_assign(&b)?;
        Ok(IcfComponent {
            mean,
            variances: a.diagonal(),
            covariance: Some(a),
        })
    } else {
        let a = col_dots(&k_du, &k_du);
        let b = col_dots(&local.sigma_dot, &global.sigma_ddot);
        Ok(IcfComponent {
            mean,
            variances: a.iter().zip(&b).map(|(x, y)| inv_n * x - inv_n2 * y).collect(),
            covariance: None,
        })
    }
}

/// Master assembly: `μ_U + Σ_m mean_m`, `Σ_UU - Σ_m cov_m`. Variances are
/// reported raw; they can be negative at low rank.
pub fn picf_predict(
    components: &[IcfComponent],
    query: &[InputPoint],
    prior_mean: f64,
    h: &Hyperparameters,
    full_cov: bool,
) -> Result<PredictiveDistribution> {
    let u = query.len();
    for c in components {
        if c.mean.len() != u || c.variances.len() != u || (full_cov && c.covariance.is_none()) {
            return Err(Error::ShapeMismatch {
                context: "predictive component",
                expected: (u, 1),
                actual: (c.mean.len(), 1),
            });
        }
    }
    let mut mean = vec![prior_mean; u];
    for c in components {
        for (a, b) in mean.iter_mut().zip(&c.mean) {
            *a += b;
        }
    }
    if full_cov {
        let mut cov = cov_symmetric(query, h)?;
        for c in components {
            cov.sub_assign(c.covariance.as_ref().expect("checked above"))?;
        }
        Ok(PredictiveDistribution::from_covariance(mean, cov, true))
    } else {
        check_points(query, h)?;
        let mut variances = prior_variances(query, h);
        for c in components {
            for (a, b) in variances.iter_mut().zip(&c.variances) {
                *a -= b;
            }
        }
        Ok(PredictiveDistribution {
            mean,
            variances,
            covariance: None,
        })
    }
}

/// Centralized ICF model, solving with `FᵀF + σ_n² I` directly.
pub fn centralized_icf(
    train: &Dataset,
    factor: &IcfFactor,
    query: &[InputPoint],
    h: &Hyperparameters,
    full_cov: bool,
) -> Result<PredictiveDistribution> {
    check_noise(h)?;
    if factor.entries.cols() != train.len() {
        return Err(Error::ShapeMismatch {
            context: "factor columns",
            expected: (factor.rank(), train.len()),
            actual: factor.entries.shape(),
        });
    }
    let mut a = factor.entries.gram();
    a.add_to_diagonal(h.noise_variance());
    let chol = Cholesky::factor(&a)?;
    let k_du = cov_matrix(train.inputs(), query, h)?;
    let alpha = chol.solve_vec(&train.residuals())?;
    let mean = k_du
        .t_mat_vec(&alpha)?
        .into_iter()
        .map(|v| v + train.prior_mean())
        .collect();
    let w = chol.solve_lower(&k_du)?;
    if full_cov {
        let mut cov = cov_symmetric(query, h)?;
        cov.sub_assign(&w.gram())?;
        Ok(PredictiveDistribution::from_covariance(mean, cov, true))
    } else {
        let red = col_dots(&w, &w);
        Ok(PredictiveDistribution {
            mean,
            variances: prior_variances(query, h).iter().zip(red).map(|(p, r)| p - r).collect(),
            covariance: None,
        })
    }
}
