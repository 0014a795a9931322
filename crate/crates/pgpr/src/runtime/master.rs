//! The master side of each protocol.

use std::path::Path;

use pgpr_core::icf::{
    even_slices, icf_global_head, icf_global_summary, picf_predict, reduce_candidates, should_pivot,
    IcfFactorBlock, IcfGlobalSummary,
};
use pgpr_core::partition::{assign_clustered, partition_even, Partition};
use pgpr_core::pitc::global_summary;
use pgpr_core::{Dataset, Error, Hyperparameters, InputPoint, Matrix, PredictiveDistribution, SupportSet};

use super::ledger::{Collective, Ledger};
use super::protocol::{self, Command, MessageKind, Reply, WorkerMessage, WorkerSetup};
use super::transport::{ProcessTransport, ThreadTransport, Transport};
use super::RuntimeError;

type Result<T, E = RuntimeError> = std::result::Result<T, E>;

/// How training and query points are spread over the machines.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionMode {
    /// Round robin by index.
    Even,
    /// One seeded center per machine, capacity-capped nearest-center
    /// assignment. Costs one extra exchange.
    Clustered { seed: u64 },
    /// Blocks fixed by the caller; their count must match the cluster.
    Given(Partition),
}

/// A set of M workers behind some transport.
pub struct Cluster {
    transport: Box<dyn Transport>,
}

impl Cluster {
    pub fn threads(machines: usize) -> Result<Self> {
        check_machines(machines)?;
        Ok(Self::from_transport(Box::new(ThreadTransport::new(machines))))
    }

    /// Spawns `machines` copies of `exe` in worker mode.
    pub fn processes(machines: usize, exe: &Path) -> Result<Self> {
        check_machines(machines)?;
        Ok(Self::from_transport(Box::new(ProcessTransport::spawn(machines, exe)?)))
    }

    pub fn from_transport(transport: Box<dyn Transport>) -> Self {
        Self { transport }
    }

    pub fn machines(&self) -> usize {
        self.transport.machines()
    }

    pub fn transport_name(&self) -> &'static str {
        self.transport.name()
    }

    /// One command per worker; replies in machine order.
    fn each(&mut self, cmds: Vec<Command>) -> Result<Vec<Reply>> {
        let replies = self.transport.exchange(cmds.into_iter().map(Some).collect())?;
        Ok(replies
            .into_iter()
            .map(|r| r.expect("every worker was sent a command"))
            .collect())
    }

    fn all(&mut self, cmd: Command) -> Result<Vec<Reply>> {
        let m = self.machines();
        self.each(vec![cmd; m])
    }

    fn one(&mut self, target: usize, cmd: Command) -> Result<Reply> {
        let mut cmds: Vec<Option<Command>> = (0..self.machines()).map(|_| None).collect();
        cmds[target] = Some(cmd);
        let mut replies = self.transport.exchange(cmds)?;
        Ok(replies[target].take().expect("command was sent"))
    }
}

fn check_machines(machines: usize) -> Result<()> {
    if machines == 0 {
        return Err(Error::InvalidArgument("at least one machine is required".into()).into());
    }
    Ok(())
}

/// Prediction plus the accounting of the run that produced it.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub prediction: PredictiveDistribution,
    pub ledger: Ledger,
    pub partition: Partition,
}

fn unexpected(m: usize, what: &str, got: &Reply) -> RuntimeError {
    RuntimeError::Protocol(format!("worker {m} answered {what} with {got:?}"))
}

/// Unpacks replies of one variant, recording each as a message of `kind`.
fn gather<T>(
    ledger: &mut Ledger,
    kind: MessageKind,
    replies: Vec<Reply>,
    mut unpack: impl FnMut(Reply) -> std::result::Result<(T, usize), Reply>,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(replies.len());
    for (m, reply) in replies.into_iter().enumerate() {
        let (v, scalars) = unpack(reply).map_err(|r| unexpected(m, kind.as_str(), &r))?;
        let msg = WorkerMessage {
            sender: Some(m),
            kind,
            payload: (),
            payload_scalars: scalars,
        };
        ledger.record(msg.kind, msg.payload_scalars);
        out.push(v);
    }
    ledger.record_collective(Collective::Gather, kind);
    Ok(out)
}

fn broadcast(ledger: &mut Ledger, kind: MessageKind, scalars: usize) {
    ledger.record(kind, scalars);
    ledger.record_collective(Collective::Broadcast, kind);
}

fn expect_acks(replies: &[Reply]) -> Result<()> {
    for (m, r) in replies.iter().enumerate() {
        if !matches!(r, Reply::Ack) {
            return Err(unexpected(m, "an acknowledgement", r));
        }
    }
    Ok(())
}

struct Job<'a> {
    train: &'a Dataset,
    query: &'a [InputPoint],
    h: &'a Hyperparameters,
    support: Option<&'a SupportSet>,
    full_cov: bool,
    /// Ship the whole query set to every worker.
    whole_query: bool,
}

fn setup(cluster: &mut Cluster, job: &Job<'_>, part: &Partition) -> Result<()> {
    let cmds = part
        .blocks()
        .iter()
        .zip(part.query_blocks())
        .map(|(b, q)| {
            Command::Setup(Box::new(WorkerSetup {
                hyper: job.h.clone(),
                block: b.clone(),
                query_block: q.clone(),
                query: if job.whole_query { job.query.to_vec() } else { Vec::new() },
                support: job.support.cloned(),
                full_cov: job.full_cov,
            }))
        })
        .collect();
    expect_acks(&cluster.each(cmds)?)
}

fn labels(index: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for (m, idx) in index.iter().enumerate() {
        for &i in idx {
            out[i] = m;
        }
    }
    out
}

/// Partitions the data per `mode` and leaves every worker holding its
/// block. Clustering runs as an exchange: each worker draws a center from
/// its even block, the master collects and broadcasts the centers, and
/// points that change machine are shipped once.
fn distribute(cluster: &mut Cluster, ledger: &mut Ledger, job: &Job<'_>, mode: &PartitionMode) -> Result<Partition> {
    let machines = cluster.machines();
    let part = match mode {
        PartitionMode::Even => partition_even(job.train, job.query, machines)?,
        PartitionMode::Given(p) => {
            if p.num_blocks() != machines {
                return Err(Error::InvalidArgument(format!(
                    "partition has {} blocks for {machines} machines",
                    p.num_blocks()
                ))
                .into());
            }
            if p.train_len() != job.train.len() || p.query_len() != job.query.len() {
                return Err(Error::InvalidArgument(format!(
                    "partition holds {} training and {} query points, the run has {} and {}",
                    p.train_len(),
                    p.query_len(),
                    job.train.len(),
                    job.query.len()
                ))
                .into());
            }
            p.clone()
        }
        PartitionMode::Clustered { seed } => {
            let initial = partition_even(job.train, job.query, machines)?;
            setup(cluster, job, &initial)?;
            let replies = cluster.all(Command::ClusterCenter { seed: *seed })?;
            let centers = gather(ledger, MessageKind::ClusterCenter, replies, |r| match r {
                Reply::Center(c) => {
                    let n = c.len();
                    Ok((c, n))
                }
                other => Err(other),
            })?;
            broadcast(ledger, MessageKind::ClusterCenters, centers.iter().map(Vec::len).sum());
            let part = assign_clustered(job.train, job.query, &centers)?;

            let d = job.h.dim();
            let before = labels(initial.train_index(), job.train.len());
            let after = labels(part.train_index(), job.train.len());
            for (a, b) in before.iter().zip(&after) {
                if a != b {
                    ledger.record(MessageKind::ReassignedPoint, d + 1);
                }
            }
            let before = labels(initial.query_index(), job.query.len());
            let after = labels(part.query_index(), job.query.len());
            for (a, b) in before.iter().zip(&after) {
                if a != b {
                    ledger.record(MessageKind::ReassignedPoint, d);
                }
            }
            part
        }
    };
    setup(cluster, job, &part)?;
    Ok(part)
}

fn assemble(parts: Vec<PredictiveDistribution>, part: &Partition) -> Result<PredictiveDistribution> {
    if parts.len() == 1 {
        // A single block already is the query in order, covariance included.
        return Ok(parts.into_iter().next().expect("one part"));
    }
    Ok(PredictiveDistribution::assemble(&parts, part.query_index(), part.query_len())?)
}

fn run_pitc_family(
    cluster: &mut Cluster,
    job: &Job<'_>,
    mode: &PartitionMode,
    pic: bool,
) -> Result<RunOutput> {
    let s = job.support.expect("pitc runs carry a support set");
    let mut ledger = Ledger::new();
    let part = distribute(cluster, &mut ledger, job, mode)?;

    let replies = cluster.all(Command::PitcSummary)?;
    let locals = gather(&mut ledger, MessageKind::PitcLocalSummary, replies, |r| match r {
        Reply::PitcLocal(l) => {
            let n = l.scalar_count();
            Ok((l, n))
        }
        other => Err(other),
    })?;
    let global = global_summary(&locals, s, job.h)?;
    broadcast(&mut ledger, MessageKind::GlobalSummaryBroadcast, protocol::pitc_global_scalars(&global));

    let cmd = if pic {
        Command::PpicPredict { global }
    } else {
        Command::PpitcPredict { global }
    };
    let replies = cluster.all(cmd)?;
    let parts = gather(&mut ledger, MessageKind::PredictiveComponent, replies, |r| match r {
        Reply::Prediction(p) => {
            let n = protocol::prediction_scalars(&p);
            Ok((p, n))
        }
        other => Err(other),
    })?;
    Ok(RunOutput {
        prediction: assemble(parts, &part)?,
        ledger,
        partition: part,
    })
}

/// Distributed pPITC: local summaries, gather, global summary, broadcast,
/// per-block prediction, gather.
pub fn run_ppitc(
    cluster: &mut Cluster,
    train: &Dataset,
    query: &[InputPoint],
    s: &SupportSet,
    h: &Hyperparameters,
    mode: &PartitionMode,
    full_cov: bool,
) -> Result<RunOutput> {
    let job = Job {
        train,
        query,
        h,
        support: Some(s),
        full_cov,
        whole_query: false,
    };
    run_pitc_family(cluster, &job, mode, false)
}

/// Distributed pPIC. Same exchange as pPITC; each worker additionally uses
/// its own block when predicting its query block.
pub fn run_ppic(
    cluster: &mut Cluster,
    train: &Dataset,
    query: &[InputPoint],
    s: &SupportSet,
    h: &Hyperparameters,
    mode: &PartitionMode,
    full_cov: bool,
) -> Result<RunOutput> {
    let job = Job {
        train,
        query,
        h,
        support: Some(s),
        full_cov,
        whole_query: false,
    };
    run_pitc_family(cluster, &job, mode, true)
}

fn check_icf(train: &Dataset, rank: usize, h: &Hyperparameters) -> Result<()> {
    if rank == 0 || rank > train.len() {
        return Err(Error::InvalidArgument(format!("rank {rank} must be in 1..={}", train.len())).into());
    }
    if h.noise_variance() <= 0.0 {
        return Err(Error::InvalidArgument("incomplete Cholesky needs a positive noise variance".into()).into());
    }
    Ok(())
}

/// Pivot loop on workers that already hold their blocks: per pivot one
/// max-reduction of the candidates and one broadcast of the pivot row.
fn factorize(cluster: &mut Cluster, ledger: &mut Ledger, rank: usize, h: &Hyperparameters) -> Result<()> {
    expect_acks(&cluster.all(Command::IcfBegin { rank })?)?;
    for _ in 0..rank {
        let replies = cluster.all(Command::IcfCandidate)?;
        let mut candidates = Vec::with_capacity(replies.len());
        for (m, r) in replies.into_iter().enumerate() {
            match r {
                Reply::Candidate(c) => {
                    ledger.record(MessageKind::IcfPivotCandidate, usize::from(c.is_some()));
                    candidates.push(c);
                }
                other => return Err(unexpected(m, "a pivot candidate", &other)),
            }
        }
        ledger.record_collective(Collective::Reduction, MessageKind::IcfPivotCandidate);
        let winner = reduce_candidates(&candidates);
        if !should_pivot(winner.as_ref().map(|(_, c)| c), h) {
            break;
        }
        let (m, c) = winner.expect("checked above");
        let row = match cluster.one(m, Command::IcfPivotRow { local_index: c.local_index })? {
            Reply::PivotRow(r) => r,
            other => return Err(unexpected(m, "a pivot row", &other)),
        };
        broadcast(ledger, MessageKind::IcfPivotRow, row.scalar_count());
        expect_acks(&cluster.all(Command::IcfApplyPivot { row })?)?;
    }
    Ok(())
}

/// Factor blocks from the distributed factorization, with its ledger.
pub fn run_icf_factor(
    cluster: &mut Cluster,
    train: &Dataset,
    rank: usize,
    h: &Hyperparameters,
    mode: &PartitionMode,
) -> Result<(Vec<IcfFactorBlock>, Partition, Ledger)> {
    check_icf(train, rank, h)?;
    let job = Job {
        train,
        query: &[],
        h,
        support: None,
        full_cov: false,
        whole_query: false,
    };
    let mut ledger = Ledger::new();
    let part = distribute(cluster, &mut ledger, &job, mode)?;
    factorize(cluster, &mut ledger, rank, h)?;
    let blocks = cluster
        .all(Command::IcfFactorBlock)?
        .into_iter()
        .enumerate()
        .map(|(m, r)| match r {
            Reply::Factor(f) => Ok(f),
            other => Err(unexpected(m, "a factor block", &other)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((blocks, part, ledger))
}

/// Global summary where each worker solves for its own slice of query
/// columns. Worker m sends column slice i of `Σ̇_m` to worker i; the master
/// only fuses `(ẏ_m, Φ_m)`.
fn partitioned_global(cluster: &mut Cluster, ledger: &mut Ledger, rank: usize, u: usize, h: &Hyperparameters) -> Result<IcfGlobalSummary> {
    let machines = cluster.machines();
    let replies = cluster.all(Command::IcfSummaryHead)?;
    let heads = gather(ledger, MessageKind::IcfSummaryHead, replies, |r| match r {
        Reply::IcfHead { y_dot, phi } => {
            let n = protocol::icf_head_scalars(&y_dot, &phi);
            Ok(((y_dot, phi), n))
        }
        other => Err(other),
    })?;
    let (phi_total, y_ddot) = icf_global_head(heads.iter().map(|(y, p)| (y.as_slice(), p)), rank, h)?;

    let bounds: Vec<(usize, usize)> = even_slices(u, machines).into_iter().map(|r| (r.start, r.end)).collect();
    let replies = cluster.all(Command::IcfSummarySlices { bounds })?;
    let mut by_target: Vec<Vec<Matrix>> = vec![Vec::with_capacity(machines); machines];
    for (m, r) in replies.into_iter().enumerate() {
        match r {
            Reply::Slices(slices) if slices.len() == machines => {
                for (i, s) in slices.into_iter().enumerate() {
                    ledger.record(MessageKind::IcfSummarySlice, protocol::slice_scalars(&s));
                    by_target[i].push(s);
                }
            }
            other => return Err(unexpected(m, "summary slices", &other)),
        }
    }
    broadcast(ledger, MessageKind::GlobalSummaryBroadcast, rank * rank);
    let cmds = by_target
        .into_iter()
        .map(|slices| Command::IcfGlobalSlice {
            phi_total: phi_total.clone(),
            slices,
        })
        .collect();
    let replies = cluster.each(cmds)?;
    let pieces = gather(ledger, MessageKind::IcfGlobalSlice, replies, |r| match r {
        Reply::Slice(s) => {
            let n = protocol::slice_scalars(&s);
            Ok((s, n))
        }
        other => Err(other),
    })?;
    Ok(IcfGlobalSummary {
        y_ddot,
        sigma_ddot: Matrix::hconcat(&pieces)?,
        phi_total,
    })
}

/// Distributed pICF: factorization, local summaries, global summary (whole
/// or query-partitioned), broadcast, predictive components, master
/// assembly. Variances are left unclamped.
#[allow(clippy::too_many_arguments)]
pub fn run_picf(
    cluster: &mut Cluster,
    train: &Dataset,
    query: &[InputPoint],
    rank: usize,
    h: &Hyperparameters,
    mode: &PartitionMode,
    partitioned_query: bool,
    full_cov: bool,
) -> Result<RunOutput> {
    check_icf(train, rank, h)?;
    let job = Job {
        train,
        query,
        h,
        support: None,
        full_cov,
        whole_query: true,
    };
    let mut ledger = Ledger::new();
    let part = distribute(cluster, &mut ledger, &job, mode)?;
    factorize(cluster, &mut ledger, rank, h)?;

    let global = if partitioned_query {
        partitioned_global(cluster, &mut ledger, rank, query.len(), h)?
    } else {
        let replies = cluster.all(Command::IcfSummary)?;
        let locals = gather(&mut ledger, MessageKind::IcfLocalSummary, replies, |r| match r {
            Reply::IcfLocal(l) => {
                let n = l.scalar_count();
                Ok((l, n))
            }
            other => Err(other),
        })?;
        icf_global_summary(&locals, h)?
    };
    broadcast(&mut ledger, MessageKind::GlobalSummaryBroadcast, protocol::icf_global_scalars(&global));

    let replies = cluster.all(Command::IcfComponent { global })?;
    let comps = gather(&mut ledger, MessageKind::PredictiveComponent, replies, |r| match r {
        Reply::Component(c) => {
            let n = c.scalar_count();
            Ok((c, n))
        }
        other => Err(other),
    })?;
    let prediction = picf_predict(&comps, query, train.prior_mean(), h, full_cov)?;
    Ok(RunOutput {
        prediction,
        ledger,
        partition: part,
    })
}
