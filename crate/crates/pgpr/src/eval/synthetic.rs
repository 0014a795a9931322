//! Synthetic data drawn jointly from a GP prior.

use pgpr_core::kernel::cov_symmetric;
use pgpr_core::{Cholesky, Dataset, Hyperparameters, InputPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::EvalError;

/// Largest joint draw; the sample needs a dense factorization.
pub const MAX_JOINT_POINTS: usize = 4096;

/// Inputs are drawn uniformly from `[0, DOMAIN]^d`.
pub const DOMAIN: f64 = 10.0;

/// Generating kernel. Unlike [`Hyperparameters`] the signal variance may be
/// zero, leaving pure noise around the prior mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub length_scales: Vec<f64>,
    pub prior_mean: f64,
}

impl SyntheticSpec {
    pub fn from_hyper(h: &Hyperparameters, prior_mean: f64) -> Self {
        Self {
            signal_variance: h.signal_variance(),
            noise_variance: h.noise_variance(),
            length_scales: h.length_scales().to_vec(),
            prior_mean,
        }
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }
}

/// Draws `n_train + n_test` points in one joint sample and returns the
/// first `n_train` as training data. Ids run `0..n_train` for training and
/// continue through the test points, so test outputs carry their own noise.
pub fn generate_synthetic(
    n_train: usize,
    n_test: usize,
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<(Dataset, Dataset), EvalError> {
    let n = n_train + n_test;
    if n > MAX_JOINT_POINTS {
        return Err(EvalError::Config {
            field: "synthetic",
            message: format!("{n} points exceed the joint-draw cap of {MAX_JOINT_POINTS}; use the tiled generator"),
        });
    }
    let (points, y) = draw(n, 0, spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
    split(points, y, n_train, spec.prior_mean)
}

/// Like [`generate_synthetic`] but for any size: independent joint draws of
/// at most [`MAX_JOINT_POINTS`] points are concatenated, then split.
pub fn generate_tiled(
    n_train: usize,
    n_test: usize,
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<(Dataset, Dataset), EvalError> {
    let n = n_train + n_test;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    while points.len() < n {
        let take = (n - points.len()).min(MAX_JOINT_POINTS);
        let (p, v) = draw(take, points.len() as u64, spec, &mut rng)?;
        points.extend(p);
        y.extend(v);
    }
    split(points, y, n_train, spec.prior_mean)
}

fn split(mut points: Vec<InputPoint>, mut y: Vec<f64>, n_train: usize, mu: f64) -> Result<(Dataset, Dataset), EvalError> {
    let test_points = points.split_off(n_train);
    let test_y = y.split_off(n_train);
    Ok((Dataset::new(points, y, mu)?, Dataset::new(test_points, test_y, mu)?))
}

fn draw(n: usize, first_id: u64, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<(Vec<InputPoint>, Vec<f64>), EvalError> {
    let valid = |v: f64| v >= 0.0 && v.is_finite();
    if !valid(spec.signal_variance) || !valid(spec.noise_variance) {
        return Err(EvalError::Config {
            field: "signal_variance",
            message: "variances must be nonnegative".into(),
        });
    }
    let d = spec.dim();
    let points: Vec<InputPoint> = (0..n)
        .map(|i| {
            let x = (0..d).map(|_| rng.random::<f64>() * DOMAIN).collect();
            InputPoint::new(first_id + i as u64, x)
        })
        .collect();
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y = if spec.signal_variance == 0.0 {
        let sd = spec.noise_variance.sqrt();
        z.iter().map(|z| spec.prior_mean + sd * z).collect()
    } else {
        let h = Hyperparameters::new(spec.signal_variance, spec.noise_variance, spec.length_scales.clone())?;
        let l = Cholesky::factor(&cov_symmetric(&points, &h)?)?;
        let lz = l.lower().mat_vec(&z)?;
        lz.into_iter().map(|v| spec.prior_mean + v).collect()
    };
    Ok((points, y))
}
