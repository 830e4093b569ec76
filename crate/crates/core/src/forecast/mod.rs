//! Probabilistic PV power prediction.
//!
//! At midnight the normalized production shape is tracked with an
//! exponentially weighted moving average and the daily multiplier is
//! predicted with an ARMA(1,1) model of past optimal multipliers. During
//! the day, production observed after sunrise gives a least-squares
//! estimate of today's multiplier that is fused with the night prior. The
//! slot-wise residuals around `p·Y` follow an AR(1) model over daytime
//! slots.

mod arma;
mod error_model;
mod forecaster;
mod fusion;
mod multiplier;
mod shape;
mod sunrise;

use serde::{Deserialize, Serialize};

use crate::error::ForecastError;

pub use arma::{css_residuals, fit_arma11, MultiplierModel, MIN_ARMA_HISTORY};
pub use error_model::{
    fit_error_model, fit_error_model_from_residuals, fit_observation_variances, ErrorModel,
    ErrorTerm, HistoryDay, ObservationVarianceTable, MIN_ERROR_HISTORY,
};
pub use forecaster::{ForecastConfig, Forecaster, ForecasterSnapshot, IntradayEstimate};
pub use fusion::{fuse_bayes, GaussianBelief};
pub use multiplier::{
    daytime_multiplier_estimate, optimal_multiplier, point_forecast, predict_night,
};
pub use shape::{normalize_day, update_shape, ShapeState};
pub use sunrise::{daylight_window, detect_sunrise, detect_sunset, SunriseRule};

/// One day of PV power samples (kW) on the `Δ_pv` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyProfile {
    day_index: usize,
    samples: Vec<f64>,
}

impl DailyProfile {
    /// `slots_per_day` comes from a validated [`crate::time::TimeGrid`], so
    /// the day is a whole number of samples.
    pub fn new(
        day_index: usize,
        samples: Vec<f64>,
        slots_per_day: usize,
    ) -> Result<Self, ForecastError> {
        if samples.len() != slots_per_day {
            return Err(ForecastError::LengthMismatch {
                expected: slots_per_day,
                got: samples.len(),
            });
        }
        if let Some((slot, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(ForecastError::InvalidSample { slot, value });
        }
        Ok(Self { day_index, samples })
    }

    pub fn day_index(&self) -> usize {
        self.day_index
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }

    /// Energy in kWh for a sampling step of `pv_hours`.
    pub fn energy(&self, pv_hours: f64) -> f64 {
        self.samples.iter().sum::<f64>() * pv_hours
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            day_index: self.day_index,
            samples: self.samples.iter().map(|v| v * factor).collect(),
        }
    }
}
