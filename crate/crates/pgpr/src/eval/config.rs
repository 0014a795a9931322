//! Run configuration: a flat TOML file, overridden by command-line flags,
//! optionally expanded into a sweep.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use pgpr_core::Hyperparameters;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fgp,
    Ppitc,
    Ppic,
    Picf,
    Pitc,
    Pic,
    Icf,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fgp => "fgp",
            Method::Ppitc => "ppitc",
            Method::Ppic => "ppic",
            Method::Picf => "picf",
            Method::Pitc => "pitc",
            Method::Pic => "pic",
            Method::Icf => "icf",
        }
    }

    pub fn needs_support(self) -> bool {
        matches!(self, Method::Ppitc | Method::Ppic | Method::Pitc | Method::Pic)
    }

    pub fn needs_rank(self) -> bool {
        matches!(self, Method::Picf | Method::Icf)
    }

    pub fn is_parallel(self) -> bool {
        matches!(self, Method::Ppitc | Method::Ppic | Method::Picf)
    }

    /// The centralized method a parallel one is equivalent to.
    pub fn centralized(self) -> Option<Method> {
        match self {
            Method::Ppitc => Some(Method::Pitc),
            Method::Ppic => Some(Method::Pic),
            Method::Picf => Some(Method::Icf),
            _ => None,
        }
    }
}

impl FromStr for Method {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        Method::deserialize(toml::Value::String(s.into())).map_err(|_| EvalError::Config {
            field: "method",
            message: format!("unknown method {s:?}; expected fgp, ppitc, ppic, picf, pitc, pic or icf"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Even,
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    #[default]
    Threads,
    Processes,
}

/// Synthetic data shape: dimension, training and test sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticShape {
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
}

impl FromStr for SyntheticShape {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        let bad = || EvalError::Config {
            field: "synthetic",
            message: format!("expected d,n_train,n_test, got {s:?}"),
        };
        let v: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        match v[..] {
            [dim, n_train, n_test] => Ok(Self { dim, n_train, n_test }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Option<Method>,
    pub machines: usize,
    pub support_size: Option<usize>,
    pub rank: Option<usize>,
    pub signal_variance: f64,
    pub noise_variance: f64,
    /// One per input dimension; a single value is repeated.
    pub length_scales: Vec<f64>,
    pub prior_mean: f64,
    /// Seeds the synthetic draw and the test split.
    pub seed: u64,
    /// Seeds cluster centers.
    pub partition_seed: u64,
    /// Seeds the support candidate pool.
    pub support_seed: u64,
    pub candidate_pool: usize,
    /// Defaults to clustered for pPIC/PIC and even otherwise.
    pub partition: Option<PartitionKind>,
    pub transport: TransportKind,
    pub full_cov: bool,
    /// pICF only: split the global summary's query columns across workers.
    pub partitioned_query: bool,
    pub synthetic: Option<SyntheticShape>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: None,
            machines: 1,
            support_size: None,
            rank: None,
            signal_variance: 1.0,
            noise_variance: 0.01,
            length_scales: vec![1.0],
            prior_mean: 0.0,
            seed: 0,
            partition_seed: 0,
            support_seed: 0,
            candidate_pool: 2048,
            partition: None,
            transport: TransportKind::Threads,
            full_cov: false,
            partitioned_query: false,
            synthetic: None,
            train: None,
            test: None,
            out: None,
        }
    }
}

fn config_error(field: &'static str, message: impl Into<String>) -> EvalError {
    EvalError::Config {
        field,
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        toml::from_str(text).map_err(|e| config_error("config", e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error("config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn method(&self) -> Result<Method, EvalError> {
        self.method.ok_or_else(|| config_error("method", "no method given"))
    }

    pub fn partition_kind(&self) -> Result<PartitionKind, EvalError> {
        Ok(self.partition.unwrap_or(match self.method()? {
            Method::Ppic | Method::Pic => PartitionKind::Clustered,
            _ => PartitionKind::Even,
        }))
    }

    /// `|S|` or `R`, whichever the method uses.
    pub fn param(&self) -> Option<usize> {
        match self.method {
            Some(m) if m.needs_support() => self.support_size,
            Some(m) if m.needs_rank() => self.rank,
            _ => None,
        }
    }

    /// Checks the fields that do not depend on the data.
    pub fn validate(&self) -> Result<(), EvalError> {
        let method = self.method()?;
        if self.machines == 0 {
            return Err(config_error("machines", "must be at least 1"));
        }
        if method.needs_support() && !self.support_size.is_some_and(|s| s > 0) {
            return Err(config_error("support_size", format!("{} needs a positive support_size", method.as_str())));
        }
        if method.needs_rank() && !self.rank.is_some_and(|r| r > 0) {
            return Err(config_error("rank", format!("{} needs a positive rank", method.as_str())));
        }
        if self.candidate_pool == 0 {
            return Err(config_error("candidate_pool", "must be positive"));
        }
        if self.synthetic.is_some() && self.train.is_some() {
            return Err(config_error("train", "give either synthetic or train, not both"));
        }
        if self.synthetic.is_none() && self.train.is_none() {
            return Err(config_error("train", "no data: give train or synthetic"));
        }
        if self.test.is_some() && self.train.is_none() {
            return Err(config_error("test", "a test file needs a train file"));
        }
        if let Some(s) = self.synthetic {
            if s.dim == 0 || s.n_train == 0 || s.n_test == 0 {
                return Err(config_error("synthetic", "dimension and sizes must be positive"));
            }
        }
        Ok(())
    }

    /// Hyperparameters for `dim` input dimensions.
    pub fn hyper(&self, dim: usize) -> Result<Hyperparameters, EvalError> {
        let ls = match self.length_scales.len() {
            1 => vec![self.length_scales[0]; dim],
            n if n == dim => self.length_scales.clone(),
            n => return Err(config_error("length_scales", format!("{n} length-scales for {dim} input dimensions"))),
        };
        Hyperparameters::new(self.signal_variance, self.noise_variance, ls)
            .map_err(|e| config_error("signal_variance", e.to_string()))
    }

    /// Sets one key from its textual value, as a TOML value or else a string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), EvalError> {
        let parsed = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut table = toml::Table::try_from(&*self).map_err(|e| config_error("config", e.to_string()))?;
        table.insert(key.to_string(), parsed);
        *self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_error("sweep", format!("{key}={value}: {}", e.message())))?;
        Ok(())
    }
}

/// One `--sweep KEY=v1,v2,...` axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl FromStr for SweepAxis {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| config_error("sweep", format!("expected KEY=v1,v2,..., got {s:?}")))?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if key.trim().is_empty() || values.iter().any(String::is_empty) {
            return Err(config_error("sweep", format!("malformed sweep {s:?}")));
        }
        Ok(Self {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Cartesian product of the axes, the first axis varying slowest.
pub fn expand_sweep(base: &RunConfig, axes: &[SweepAxis]) -> Result<Vec<RunConfig>, EvalError> {
    let mut out = vec![base.clone()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.values.len());
        for cfg in &out {
            for v in &axis.values {
                let mut c = cfg.clone();
                c.set(&axis.key, v)?;
                next.push(c);
            }
        }
        out = next;
    }
    Ok(out)
}
