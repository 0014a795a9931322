//! Full GP posterior.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::{cov_matrix, cov_symmetric, prior_variances, Hyperparameters, InputPoint};
use crate::linalg::{col_dots, Cholesky, Matrix};

/// Observed inputs and outputs with a constant prior mean.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    inputs: Vec<InputPoint>,
    outputs: Vec<f64>,
    prior_mean: f64,
}

impl Dataset {
    pub fn new(inputs: Vec<InputPoint>, outputs: Vec<f64>, prior_mean: f64) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::ShapeMismatch {
                context: "dataset outputs",
                expected: (inputs.len(), 1),
                actual: (outputs.len(), 1),
            });
        }
        let mut seen = BTreeSet::new();
        for p in &inputs {
            if !seen.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
        }
        if let Some(d) = inputs.first().map(InputPoint::dim) {
            if let Some(bad) = inputs.iter().find(|p| p.dim() != d) {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: bad.dim(),
                });
            }
        }
        Ok(Self {
            inputs,
            outputs,
            prior_mean,
        })
    }

    pub fn empty(prior_mean: f64) -> Self {
        Self {
            inputs: Vec::new(),
            outputs: Vec::new(),
            prior_mean,
        }
    }

    pub fn inputs(&self) -> &[InputPoint] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// `y - μ`
    pub fn residuals(&self) -> Vec<f64> {
        self.outputs.iter().map(|y| y - self.prior_mean).collect()
    }

    /// Sub-dataset at the given positions, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            outputs: indices.iter().map(|&i| self.outputs[i]).collect(),
            prior_mean: self.prior_mean,
        }
    }

    /// Concatenation in order; ids must stay unique.
    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let prior_mean = parts.first().map_or(0.0, |p| p.prior_mean);
        let inputs = parts.iter().flat_map(|p| p.inputs.iter().cloned()).collect();
        let outputs = parts.iter().flat_map(|p| p.outputs.iter().copied()).collect();
        Dataset::new(inputs, outputs, prior_mean)
    }

    pub fn with_outputs(&self, outputs: Vec<f64>) -> Result<Dataset> {
        Dataset::new(self.inputs.clone(), outputs, self.prior_mean)
    }
}

/// Posterior mean and marginal variances, with the full covariance on request.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictiveDistribution {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
    pub covariance: Option<Matrix>,
}

impl PredictiveDistribution {
    /// Builds from a mean and a full covariance; variances are its diagonal.
    pub fn from_covariance(mean: Vec<f64>, covariance: Matrix, keep_full: bool) -> Self {
        let variances = covariance.diagonal();
        Self {
            mean,
            variances,
            covariance: keep_full.then_some(covariance),
        }
    }

    /// The prior over `query`.
    pub fn prior(query: &[InputPoint], prior_mean: f64, h: &Hyperparameters, full_cov: bool) -> Result<Self> {
        let mean = vec![prior_mean; query.len()];
        if full_cov {
            Ok(Self::from_covariance(mean, cov_symmetric(query, h)?, true))
        } else {
            crate::kernel::check_points(query, h)?;
            Ok(Self {
                mean,
                variances: prior_variances(query, h),
                covariance: None,
            })
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn negative_variance_count(&self) -> usize {
        self.variances.iter().filter(|v| **v < 0.0).count()
    }

    /// Largest absolute difference over means and variances.
    pub fn max_abs_diff(&self, other: &PredictiveDistribution) -> f64 {
        assert_eq!(self.len(), other.len(), "distributions of different length");
        self.mean
            .iter()
            .zip(&other.mean)
            .chain(self.variances.iter().zip(&other.variances))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Reorders per-block results into query order. `index[m][k]` is the
    /// position in the original query list of the k-th point of block m.
    /// Cross-block covariance is not produced by the block predictors, so
    /// the result carries marginals only.
    pub fn assemble(parts: &[PredictiveDistribution], index: &[Vec<usize>], n: usize) -> Result<Self> {
        if parts.len() != index.len() {
            return Err(Error::ShapeMismatch {
                context: "assemble blocks",
                expected: (index.len(), 1),
                actual: (parts.len(), 1),
            });
        }
        let mut mean = vec![f64::NAN; n];
        let mut variances = vec![f64::NAN; n];
        let mut filled = 0;
        for (part, idx) in parts.iter().zip(index) {
            if part.len() != idx.len() {
                return Err(Error::ShapeMismatch {
                    context: "assemble block",
                    expected: (idx.len(), 1),
                    actual: (part.len(), 1),
                });
            }
            for (k, &i) in idx.iter().enumerate() {
                mean[i] = part.mean[k];
                variances[i] = part.variances[k];
            }
            filled += idx.len();
        }
        if filled != n {
            return Err(Error::ShapeMismatch {
                context: "assemble coverage",
                expected: (n, 1),
                actual: (filled, 1),
            });
        }
        Ok(Self {
            mean,
            variances,
            covariance: None,
        })
    }
}

/// Exact GP posterior of `query` given `train`.
///
/// Mean `μ_U + Σ_UD Σ_DD⁻¹ (y_D - μ_D)`, covariance
/// `Σ_UU - Σ_UD Σ_DD⁻¹ Σ_DU`; an empty training set returns the prior.
pub fn fgp_predict(
    train: &Dataset,
    query: &[InputPoint],
    h: &Hyperparameters,
    full_cov: bool,
) -> Result<PredictiveDistribution> {
    if train.is_empty() {
        return PredictiveDistribution::prior(query, train.prior_mean(), h, full_cov);
    }
    let k_dd = cov_symmetric(train.inputs(), h)?;
    let chol = Cholesky::factor(&k_dd)?;
    let k_du = cov_matrix(train.inputs(), query, h)?;

    let alpha = chol.solve_vec(&train.residuals())?;
    let mut mean = k_du.t_mat_vec(&alpha)?;
    for m in &mut mean {
        *m += train.prior_mean();
    }

    // V = L⁻¹ Σ_DU, so Σ_UD Σ_DD⁻¹ Σ_DU = Vᵀ V.
    let v = chol.solve_lower(&k_du)?;
    if full_cov {
        let mut cov = cov_symmetric(query, h)?;
        cov.sub_assign(&v.gram())?;
        Ok(PredictiveDistribution::from_covariance(mean, cov, true))
    } else {
        let reduction = col_dots(&v, &v);
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

#[cfg(test)]
mod tests {
    use super::*;

    fn h(noise: f64) -> Hyperparameters {
        Hyperparameters::new(1.0, noise, vec![1.0]).unwrap()
    }

    #[test]
    fn empty_train_gives_prior() {
        let train = Dataset::empty(0.7);
        let q = [InputPoint::new(5, vec![0.2])];
        let p = fgp_predict(&train, &q, &h(0.25), false).unwrap();
        assert_eq!(p.mean, vec![0.7]);
        assert_eq!(p.variances, vec![1.25]);
    }

    #[test]
    fn scalar_hand_evaluation() {
        let train = Dataset::new(vec![InputPoint::new(0, vec![0.0])], vec![2.0], 0.0).unwrap();
        let q = [InputPoint::new(1, vec![1.0])];
        let p = fgp_predict(&train, &q, &h(0.0), true).unwrap();
        let e = libm::exp(-0.5);
        assert!((p.mean[0] - 2.0 * e).abs() < 1e-14);
        assert!((p.mean[0] - 1.213061).abs() < 1e-6);
        assert!((p.variances[0] - (1.0 - e * e)).abs() < 1e-14);
        assert!((p.variances[0] - 0.632121).abs() < 1e-6);
        assert_eq!(p.covariance.unwrap().diagonal(), p.variances);
    }

    #[test]
    fn noiseless_interpolation() {
        let xs = [0.0, 0.7, 1.9, 3.2];
        let ys = [1.0, -0.5, 0.3, 2.0];
        let train = Dataset::new(
            xs.iter().enumerate().map(|(i, x)| InputPoint::new(i as u64, vec![*x])).collect(),
            ys.to_vec(),
            0.0,
        )
        .unwrap();
        let q = [InputPoint::new(100, vec![1.9])];
        let p = fgp_predict(&train, &q, &h(0.0), false).unwrap();
        assert!((p.mean[0] - 0.3).abs() < 1e-6);
        assert!(p.variances[0].abs() < 1e-6);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let pts = vec![InputPoint::new(1, vec![0.0]), InputPoint::new(1, vec![1.0])];
        assert_eq!(Dataset::new(pts, vec![0.0, 0.0], 0.0), Err(Error::DuplicateId(1)));
    }

    #[test]
    fn assemble_restores_query_order() {
        let a = PredictiveDistribution {
            mean: vec![1.0, 3.0],
            variances: vec![0.1, 0.3],
            covariance: None,
        };
        let b = PredictiveDistribution {
            mean: vec![2.0],
            variances: vec![0.2],
            covariance: None,
        };
        let out = PredictiveDistribution::assemble(&[a, b], &[vec![0, 2], vec![1]], 3).unwrap();
        assert_eq!(out.mean, vec![1.0, 2.0, 3.0]);
        assert_eq!(out.variances, vec![0.1, 0.2, 0.3]);
    }
}
