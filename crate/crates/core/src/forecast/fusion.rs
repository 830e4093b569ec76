use serde::{Deserialize, Serialize};

use crate::error::ForecastError;

/// Gaussian belief about a daily multiplier.
///
/// A zero variance is a point mass; it only arises through
/// [`GaussianBelief::point`] (used when forecast noise is switched off).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianBelief {
    pub fn new(mean: f64, variance: f64) -> Result<Self, ForecastError> {
        if !mean.is_finite() || !(variance > 0.0) || !variance.is_finite() {
            return Err(ForecastError::InvalidParameter(format!(
                "Gaussian needs finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn point(mean: f64) -> Self {
        Self {
            mean,
            variance: 0.0,
        }
    }

    pub fn is_point(&self) -> bool {
        self.variance == 0.0
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn precision(&self) -> f64 {
        1.0 / self.variance
    }
}

/// Posterior of a Gaussian prior combined with one Gaussian observation of
/// variance `sigma2_m`. The posterior mean is also its mode, i.e. the MAP
/// multiplier.
pub fn fuse_bayes(prior: GaussianBelief, observation: f64, sigma2_m: f64) -> GaussianBelief {
    if prior.is_point() || !(sigma2_m > 0.0) || !sigma2_m.is_finite() || !observation.is_finite() {
        return prior;
    }
    let precision = prior.precision() + 1.0 / sigma2_m;
    let variance = 1.0 / precision;
    let mean = variance * (prior.mean / prior.variance + observation / sigma2_m);
    GaussianBelief { mean, variance }
}
