//! Squared-exponential covariance.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Signal variance, noise variance and per-dimension length-scales.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyperparameters {
    signal_variance: f64,
    noise_variance: f64,
    length_scales: Vec<f64>,
}

impl Hyperparameters {
    pub fn new(signal_variance: f64, noise_variance: f64, length_scales: Vec<f64>) -> Result<Self> {
        if !(signal_variance > 0.0) || !signal_variance.is_finite() {
            return Err(Error::InvalidHyperparameters(format!(
                "signal_variance must be positive, got {signal_variance}"
            )));
        }
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidHyperparameters(format!(
                "noise_variance must be nonnegative, got {noise_variance}"
            )));
        }
        if length_scales.is_empty() {
            return Err(Error::InvalidHyperparameters(
                "at least one length-scale is required".into(),
            ));
        }
        if let Some(bad) = length_scales.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidHyperparameters(format!(
                "length-scales must be positive, got {bad}"
            )));
        }
        Ok(Self {
            signal_variance,
            noise_variance,
            length_scales,
        })
    }

    /// Same length-scale in every one of `dim` dimensions.
    pub fn isotropic(signal_variance: f64, noise_variance: f64, length_scale: f64, dim: usize) -> Result<Self> {
        Self::new(signal_variance, noise_variance, alloc::vec![length_scale; dim])
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// Prior variance of a single output, `σ_s² + σ_n²`.
    pub fn prior_variance(&self) -> f64 {
        self.signal_variance + self.noise_variance
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch {
                left: d,
                right: self.dim(),
            });
        }
        Ok(())
    }

    /// The noise-free part `σ_s² exp(-½ Σ ((a-b)/ℓ)²)`, no dimension check.
    #[inline]
    pub(crate) fn signal(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.length_scales) {
            let t = (x - y) / l;
            s += t * t;
        }
        self.signal_variance * libm::exp(-0.5 * s)
    }
}

/// An input location. The Kronecker delta of the noise term compares `id`s,
/// never coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InputPoint {
    pub id: u64,
    pub coords: Vec<f64>,
}

impl InputPoint {
    pub fn new(id: u64, coords: Vec<f64>) -> Self {
        Self { id, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// `σ_s² exp(-½ Σ_i ((x_i - x'_i)/ℓ_i)²) + σ_n² δ(x, x')`.
pub fn kernel(x: &InputPoint, y: &InputPoint, h: &Hyperparameters) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    h.check_dim(x.dim())?;
    Ok(kernel_unchecked(x, y, h))
}

#[inline]
pub(crate) fn kernel_unchecked(x: &InputPoint, y: &InputPoint, h: &Hyperparameters) -> f64 {
    let noise = if x.id == y.id { h.noise_variance } else { 0.0 };
    h.signal(&x.coords, &y.coords) + noise
}

pub(crate) fn check_points(points: &[InputPoint], h: &Hyperparameters) -> Result<()> {
    for p in points {
        h.check_dim(p.dim())?;
    }
    Ok(())
}

/// `Σ_AB` with entry `(i, j) = kernel(a[i], b[j])`.
pub fn cov_matrix(a: &[InputPoint], b: &[InputPoint], h: &Hyperparameters) -> Result<Matrix> {
    check_points(a, h)?;
    check_points(b, h)?;
    Ok(Matrix::from_fn(a.len(), b.len(), |i, j| {
        kernel_unchecked(&a[i], &b[j], h)
    }))
}

/// `Σ_AA`, filled from the lower triangle so the result is exactly symmetric.
pub fn cov_symmetric(a: &[InputPoint], h: &Hyperparameters) -> Result<Matrix> {
    check_points(a, h)?;
    let n = a.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_unchecked(&a[i], &a[j], h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Noise-free kernel matrix `K = Σ_AA - σ_n² I` (for distinct ids).
pub fn signal_matrix(a: &[InputPoint], h: &Hyperparameters) -> Result<Matrix> {
    check_points(a, h)?;
    let n = a.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = h.signal(&a[i].coords, &a[j].coords);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Prior variances `Σ_xx` of each point.
pub fn prior_variances(a: &[InputPoint], h: &Hyperparameters) -> Vec<f64> {
    a.iter().map(|p| kernel_unchecked(p, p, h)).collect()
}
