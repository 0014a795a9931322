//! Seeded problem instances shared by the integration suites.

#![allow(dead_code)]

use pgpr_core::{Dataset, Hyperparameters, InputPoint, PredictiveDistribution, SupportSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const QUERY_ID_BASE: u64 = 1_000_000;
pub const SUPPORT_ID_BASE: u64 = 2_000_000;

pub struct Instance {
    pub train: Dataset,
    pub query: Vec<InputPoint>,
    pub h: Hyperparameters,
}

fn point(rng: &mut ChaCha8Rng, id: u64, d: usize) -> InputPoint {
    InputPoint::new(id, (0..d).map(|_| rng.random_range(0.0..10.0)).collect())
}

/// Smooth test function plus noise on uniform inputs in `[0, 10]^d`.
/// Training ids start at `first_id`.
pub fn instance_from(seed: u64, d: usize, n: usize, u: usize, first_id: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<InputPoint> = (0..n as u64).map(|i| point(&mut rng, first_id + i, d)).collect();
    let outputs = inputs
        .iter()
        .map(|p| {
            let s: f64 = p.coords.iter().enumerate().map(|(k, x)| (x * (0.7 + 0.2 * k as f64)).sin()).sum();
            s + 0.3 + 0.2 * rng.random_range(-1.0..1.0)
        })
        .collect();
    let query = (0..u as u64).map(|i| point(&mut rng, QUERY_ID_BASE + first_id + i, d)).collect();
    Instance {
        train: Dataset::new(inputs, outputs, 0.3).unwrap(),
        query,
        h: Hyperparameters::new(1.2, 0.09, (0..d).map(|k| 1.4 + 0.3 * k as f64).collect()).unwrap(),
    }
}

pub fn instance(seed: u64, d: usize, n: usize, u: usize) -> Instance {
    instance_from(seed, d, n, u, 0)
}

/// Uniformly placed support inputs with fresh ids.
pub fn support(seed: u64, d: usize, k: usize) -> SupportSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    SupportSet::new((0..k as u64).map(|i| point(&mut rng, SUPPORT_ID_BASE + i, d)).collect()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest deviation over means and variances.
pub fn pred_diff(a: &PredictiveDistribution, b: &PredictiveDistribution) -> f64 {
    max_abs_diff(&a.mean, &b.mean).max(max_abs_diff(&a.variances, &b.variances))
}

pub fn bits(p: &PredictiveDistribution) -> Vec<u64> {
    p.mean.iter().chain(&p.variances).map(|v| v.to_bits()).collect()
}
