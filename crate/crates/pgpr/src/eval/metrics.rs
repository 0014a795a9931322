//! Predictive accuracy metrics.

use std::f64::consts::PI;

use pgpr_core::PredictiveDistribution;

use super::EvalError;

/// Variances below this are raised to it before computing MNLP.
pub const VARIANCE_FLOOR: f64 = 1e-12;

fn check(pred: &PredictiveDistribution, truth: &[f64]) -> Result<(), EvalError> {
    if pred.mean.len() != truth.len() || pred.variances.len() != truth.len() {
        return Err(EvalError::Data(format!(
            "{} predictions for {} targets",
            pred.mean.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(EvalError::Data("no test targets".into()));
    }
    Ok(())
}

/// Root mean square error of the predictive mean.
pub fn rmse(pred: &PredictiveDistribution, truth: &[f64]) -> Result<f64, EvalError> {
    check(pred, truth)?;
    let sse: f64 = pred.mean.iter().zip(truth).map(|(m, y)| (y - m).powi(2)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mnlp {
    pub value: f64,
    /// How many variances were raised to [`VARIANCE_FLOOR`].
    pub floored: usize,
}

/// Mean negative log probability of the targets under the marginal
/// predictive Gaussians.
pub fn mnlp(pred: &PredictiveDistribution, truth: &[f64]) -> Result<Mnlp, EvalError> {
    check(pred, truth)?;
    let mut floored = 0;
    let mut sum = 0.0;
    for ((m, v), y) in pred.mean.iter().zip(&pred.variances).zip(truth) {
        let v = if *v < VARIANCE_FLOOR {
            floored += 1;
            VARIANCE_FLOOR
        } else {
            *v
        };
        sum += (y - m).powi(2) / v + (2.0 * PI * v).ln();
    }
    Ok(Mnlp {
        value: 0.5 * sum / truth.len() as f64,
        floored,
    })
}
