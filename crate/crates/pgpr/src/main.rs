use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pgpr::eval::config::{
    expand_sweep, Method, PartitionKind, RunConfig, SweepAxis, SyntheticShape, TransportKind,
};
use pgpr::eval::experiment::{run_experiment, speedup_report, ResultRow};
use pgpr::eval::EvalError;

/// Parallel Gaussian process regression.
#[derive(Debug, Parser)]
#[command(version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Serve as a worker process for the process transport.
    #[command(hide = true)]
    Worker {
        #[arg(long)]
        connect: String,
        #[arg(long)]
        index: usize,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// fgp, ppitc, ppic, picf, pitc, pic or icf.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    machines: Option<usize>,
    #[arg(long)]
    support_size: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Training CSV with columns x1..xd,y.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test CSV; without it 10% of the training file is held out.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Flat TOML file; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Generate data: d,n_train,n_test.
    #[arg(long)]
    synthetic: Option<String>,
    /// even or clustered.
    #[arg(long)]
    partition: Option<String>,
    /// threads or processes.
    #[arg(long)]
    transport: Option<String>,
    /// Results CSV (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    full_cov: bool,
    /// KEY=v1,v2,...; repeat for a cartesian product.
    #[arg(long)]
    sweep: Vec<String>,
}

fn parse_choice<T: serde::de::DeserializeOwned>(field: &'static str, value: &str, allowed: &str) -> Result<T, EvalError> {
    T::deserialize(toml::Value::String(value.to_string())).map_err(|_| EvalError::Config {
        field,
        message: format!("{value:?} is not one of {allowed}"),
    })
}

fn build_config(a: &RunArgs) -> Result<RunConfig, EvalError> {
    let mut c = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &a.method {
        c.method = Some(m.parse::<Method>()?);
    }
    if let Some(v) = a.machines {
        c.machines = v;
    }
    if let Some(v) = a.support_size {
        c.support_size = Some(v);
    }
    if let Some(v) = a.rank {
        c.rank = Some(v);
    }
    if let Some(v) = &a.train {
        c.train = Some(v.clone());
        c.synthetic = None;
    }
    if let Some(v) = &a.test {
        c.test = Some(v.clone());
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = &a.synthetic {
        c.synthetic = Some(v.parse::<SyntheticShape>()?);
        c.train = None;
        c.test = None;
    }
    if let Some(v) = &a.partition {
        c.partition = Some(parse_choice::<PartitionKind>("partition", v, "even, clustered")?);
    }
    if let Some(v) = &a.transport {
        c.transport = parse_choice::<TransportKind>("transport", v, "threads, processes")?;
    }
    if let Some(v) = &a.out {
        c.out = Some(v.clone());
    }
    if a.full_cov {
        c.full_cov = true;
    }
    Ok(c)
}

fn run(a: &RunArgs) -> Result<(), EvalError> {
    let base = build_config(a)?;
    let axes = a
        .sweep
        .iter()
        .map(|s| s.parse::<SweepAxis>())
        .collect::<Result<Vec<_>, _>>()?;
    let configs = expand_sweep(&base, &axes)?;
    for c in &configs {
        c.validate()?;
    }
    let exe = std::env::current_exe().ok();

    let mut out: Box<dyn Write> = match &base.out {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    let mut rows = Vec::with_capacity(configs.len());
    for c in &configs {
        let e = run_experiment(c, exe.as_deref())?;
        if rows.is_empty() {
            writeln!(out, "{}", ResultRow::HEADER)?;
        }
        writeln!(out, "{}", e.row.csv_line())?;
        out.flush()?;
        if e.report.floored > 0 {
            eprintln!("mnlp.floored_variances {}", e.report.floored);
        }
        if let Some(l) = &e.report.ledger {
            eprint!("{l}");
        }
        rows.push(e.row);
    }
    eprint!("{}", speedup_report(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(Sub::Worker { connect, index }) = cli.command {
        return match pgpr::runtime::serve_worker(&connect, index) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("worker {index}: {e}");
                ExitCode::FAILURE
            }
        };
    }
    match run(&cli.run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
