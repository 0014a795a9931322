//! One configured run: data, method, metrics and a result row.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use pgpr_core::icf::{centralized_icf, icf_factor_serial};
use pgpr_core::partition::{candidate_pool, partition_clustered, partition_even, select_support_set};
use pgpr_core::pitc::{centralized_pic, centralized_pitc};
use pgpr_core::{fgp_predict, Dataset, Hyperparameters, Partition, PredictiveDistribution, SupportSet};

use super::config::{Method, PartitionKind, RunConfig, TransportKind};
use super::data::{load_table, split_test};
use super::metrics::{mnlp, rmse};
use super::synthetic::{generate_synthetic, generate_tiled, SyntheticSpec, MAX_JOINT_POINTS};
use super::EvalError;
use crate::runtime::{run_picf, run_ppic, run_ppitc, Cluster, Ledger, PartitionMode};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mnlp: f64,
    /// Variances raised to the MNLP floor.
    pub floored: usize,
    pub wall_time_seconds: f64,
    pub negative_variance_count: usize,
    /// Present for the parallel methods.
    pub ledger: Option<Ledger>,
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub n_train: usize,
    pub machines: usize,
    /// `|S|` or `R`; empty for the full GP.
    pub param: Option<usize>,
    pub rmse: f64,
    pub mnlp: f64,
    pub time_seconds: f64,
    pub neg_var_count: usize,
}

/// Plain decimal for ordinary magnitudes, scientific otherwise.
fn real(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-6..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

impl ResultRow {
    pub const HEADER: &'static str = "method,n_train,machines,param,rmse,mnlp,time_seconds,neg_var_count";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6},{}",
            self.method.as_str(),
            self.n_train,
            self.machines,
            self.param.map(|p| p.to_string()).unwrap_or_default(),
            real(self.rmse),
            real(self.mnlp),
            self.time_seconds,
            self.neg_var_count
        )
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub row: ResultRow,
    pub report: MetricsReport,
    pub prediction: PredictiveDistribution,
}

/// Training and test data per the config: a synthetic draw, or CSV files
/// with a seeded 10% hold-out when no test file is given. Training ids are
/// `0..n`; test ids follow.
pub fn load_data(cfg: &RunConfig) -> Result<(Dataset, Dataset), EvalError> {
    if let Some(shape) = cfg.synthetic {
        let h = cfg.hyper(shape.dim)?;
        let spec = SyntheticSpec::from_hyper(&h, cfg.prior_mean);
        return if shape.n_train + shape.n_test > MAX_JOINT_POINTS {
            generate_tiled(shape.n_train, shape.n_test, &spec, cfg.seed)
        } else {
            generate_synthetic(shape.n_train, shape.n_test, &spec, cfg.seed)
        };
    }
    let path = cfg
        .train
        .as_ref()
        .ok_or_else(|| EvalError::Config {
            field: "train",
            message: "no training data".into(),
        })?;
    let table = load_table(path)?;
    let (train, test) = match &cfg.test {
        Some(p) => (table, load_table(p)?),
        None => split_test(&table, cfg.seed)?,
    };
    if test.dim() != train.dim() {
        return Err(EvalError::Data(format!(
            "test data has {} input columns, training data {}",
            test.dim(),
            train.dim()
        )));
    }
    let n = train.len() as u64;
    let test_y = test
        .outputs
        .clone()
        .ok_or_else(|| EvalError::Data("test data needs a y column to be scored".into()))?;
    Ok((
        train.dataset(0, cfg.prior_mean)?,
        Dataset::new(test.points(n), test_y, cfg.prior_mean)?,
    ))
}

/// Support set chosen greedily from a seeded subsample of the training
/// inputs. Support ids start after every training and test id.
pub fn choose_support(cfg: &RunConfig, train: &Dataset, test: &Dataset, h: &Hyperparameters) -> Result<SupportSet, EvalError> {
    let k = cfg.support_size.ok_or_else(|| EvalError::Config {
        field: "support_size",
        message: "missing".into(),
    })?;
    let pool_size = cfg.candidate_pool.min(train.len());
    if k > pool_size {
        return Err(EvalError::Config {
            field: "support_size",
            message: format!("{k} exceeds the candidate pool of {pool_size}"),
        });
    }
    let first_id = (train.len() + test.len()) as u64;
    let pool = candidate_pool(train, pool_size, cfg.support_seed, first_id);
    Ok(select_support_set(&pool, k, h)?)
}

fn partition_mode(cfg: &RunConfig) -> Result<PartitionMode, EvalError> {
    Ok(match cfg.partition_kind()? {
        PartitionKind::Even => PartitionMode::Even,
        PartitionKind::Clustered => PartitionMode::Clustered { seed: cfg.partition_seed },
    })
}

fn central_partition(cfg: &RunConfig, train: &Dataset, test: &Dataset) -> Result<Partition, EvalError> {
    let q = test.inputs();
    Ok(match cfg.partition_kind()? {
        PartitionKind::Even => partition_even(train, q, cfg.machines)?,
        PartitionKind::Clustered => partition_clustered(train, q, cfg.machines, cfg.partition_seed)?,
    })
}

fn cluster(cfg: &RunConfig, exe: Option<&Path>) -> Result<Cluster, EvalError> {
    Ok(match cfg.transport {
        TransportKind::Threads => Cluster::threads(cfg.machines)?,
        TransportKind::Processes => {
            let exe = exe.ok_or_else(|| EvalError::Config {
                field: "transport",
                message: "the process transport needs the pgpr executable".into(),
            })?;
            Cluster::processes(cfg.machines, exe)?
        }
    })
}

/// Runs the configured method and scores it. Only the prediction itself is
/// timed; data loading and support selection are not. `exe` is the binary
/// used to start worker processes.
pub fn run_experiment(cfg: &RunConfig, exe: Option<&Path>) -> Result<Experiment, EvalError> {
    cfg.validate()?;
    let method = cfg.method()?;
    let (train, test) = load_data(cfg)?;
    let dim = train.inputs().first().map_or(0, |p| p.dim());
    let h = cfg.hyper(dim)?;
    let query = test.inputs();
    let support = if method.needs_support() {
        Some(choose_support(cfg, &train, &test, &h)?)
    } else {
        None
    };
    let rank = cfg.rank.unwrap_or(0);
    let mut ledger = None;

    let (prediction, elapsed) = match method {
        Method::Fgp => {
            let t = Instant::now();
            (fgp_predict(&train, query, &h, cfg.full_cov)?, t.elapsed())
        }
        Method::Pitc | Method::Pic => {
            let part = central_partition(cfg, &train, &test)?;
            let s = support.as_ref().expect("support chosen above");
            let t = Instant::now();
            let p = if method == Method::Pitc {
                centralized_pitc(&train, &part, query, s, &h, cfg.full_cov)?
            } else {
                centralized_pic(&train, &part, query, s, &h, cfg.full_cov)?
            };
            (p, t.elapsed())
        }
        Method::Icf => {
            let t = Instant::now();
            let f = icf_factor_serial(train.inputs(), rank, &h)?;
            (centralized_icf(&train, &f, query, &h, cfg.full_cov)?, t.elapsed())
        }
        Method::Ppitc | Method::Ppic | Method::Picf => {
            let mode = partition_mode(cfg)?;
            let mut c = cluster(cfg, exe)?;
            let t = Instant::now();
            let out = match method {
                Method::Ppitc => run_ppitc(&mut c, &train, query, support.as_ref().expect("support"), &h, &mode, cfg.full_cov)?,
                Method::Ppic => run_ppic(&mut c, &train, query, support.as_ref().expect("support"), &h, &mode, cfg.full_cov)?,
                _ => run_picf(&mut c, &train, query, rank, &h, &mode, cfg.partitioned_query, cfg.full_cov)?,
            };
            let elapsed = t.elapsed();
            ledger = Some(out.ledger);
            (out.prediction, elapsed)
        }
    };

    let r = rmse(&prediction, test.outputs())?;
    let m = mnlp(&prediction, test.outputs())?;
    let neg = prediction.negative_variance_count();
    let time = elapsed.as_secs_f64();
    Ok(Experiment {
        row: ResultRow {
            method,
            n_train: train.len(),
            machines: cfg.machines,
            param: cfg.param(),
            rmse: r,
            mnlp: m.value,
            time_seconds: time,
            neg_var_count: neg,
        },
        report: MetricsReport {
            rmse: r,
            mnlp: m.value,
            floored: m.floored,
            wall_time_seconds: time,
            negative_variance_count: neg,
            ledger,
        },
        prediction,
    })
}

/// `centralized time / parallel time` for every parallel row whose
/// centralized counterpart (same size, machines and parameter) is also
/// present, one line each.
pub fn speedup_report(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    for p in rows.iter().filter(|r| r.method.is_parallel()) {
        let central = p.method.centralized();
        let found = rows.iter().find(|c| {
            Some(c.method) == central && c.n_train == p.n_train && c.machines == p.machines && c.param == p.param
        });
        if let Some(c) = found {
            if p.time_seconds > 0.0 {
                let _ = writeln!(
                    out,
                    "speedup {}/{} n_train={} machines={} param={} {:.3}",
                    p.method.as_str(),
                    c.method.as_str(),
                    p.n_train,
                    p.machines,
                    p.param.map(|v| v.to_string()).unwrap_or_default(),
                    c.time_seconds / p.time_seconds
                );
            }
        }
    }
    out
}
