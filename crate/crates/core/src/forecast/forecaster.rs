//! Day-by-day forecasting state used by the closed loop and the CLI.

use serde::{Deserialize, Serialize};

use super::{
    daytime_multiplier_estimate, detect_sunrise, fit_arma11, fit_error_model,
    fit_observation_variances, fuse_bayes, normalize_day, optimal_multiplier, predict_night,
    update_shape, DailyProfile, ErrorModel, GaussianBelief, HistoryDay, MultiplierModel,
    ObservationVarianceTable, ShapeState, SunriseRule,
};
use crate::error::ForecastError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    /// EWMA weight of the most recent day.
    pub alpha: f64,
    pub sunrise: SunriseRule,
    /// Collapse every forecast distribution to its mean: point-mass
    /// multiplier beliefs and a silenced error model.
    pub zero_variance: bool,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            sunrise: SunriseRule::default(),
            zero_variance: false,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<(), ForecastError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ForecastError::InvalidParameter(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.sunrise.consecutive == 0
            || !(self.sunrise.fraction >= 0.0 && self.sunrise.fraction < 1.0)
        {
            return Err(ForecastError::InvalidParameter(
                "sunrise rule needs k ≥ 1 and 0 ≤ fraction < 1".into(),
            ));
        }
        Ok(())
    }
}

/// What is known about today's multiplier from the production so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntradayEstimate {
    pub sunrise: Option<usize>,
    /// Least-squares multiplier from the samples since sunrise.
    pub observation: Option<f64>,
    pub observation_variance: Option<f64>,
    /// Night prior fused with the observation (the prior before sunrise).
    pub fused: GaussianBelief,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecaster {
    config: ForecastConfig,
    slots: usize,
    shape: Option<ShapeState>,
    history: Vec<HistoryDay>,
    /// Optimal multiplier per ingested day; dark days are `None`.
    multipliers: Vec<Option<f64>>,
    model: MultiplierModel,
    error_model: ErrorModel,
    observation_variances: ObservationVarianceTable,
    running_max: f64,
}

/// Serializable view of everything the forecaster has fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSnapshot {
    pub config: ForecastConfig,
    pub days_ingested: usize,
    pub shape: Option<ShapeState>,
    pub multipliers: Vec<Option<f64>>,
    pub multiplier_model: MultiplierModel,
    pub error_model: ErrorModel,
    pub observation_variances: ObservationVarianceTable,
    pub running_max: f64,
    pub next_day_prior: GaussianBelief,
}

impl Forecaster {
    pub fn new(config: ForecastConfig, slots: usize) -> Result<Self, ForecastError> {
        config.validate()?;
        Ok(Self {
            config,
            slots,
            shape: None,
            history: Vec::new(),
            multipliers: Vec::new(),
            model: MultiplierModel::fallback(&[]),
            error_model: ErrorModel::empty(slots),
            observation_variances: ObservationVarianceTable::empty(slots),
            running_max: 0.0,
        })
    }

    pub fn config(&self) -> &ForecastConfig {
        &self.config
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn days_ingested(&self) -> usize {
        self.multipliers.len()
    }

    pub fn running_max(&self) -> f64 {
        self.running_max
    }

    /// Midnight roll: computes the finished day's optimal multiplier with
    /// the shape that was in force, updates the shape and refits the models.
    ///
    /// Dark days leave the shape and the multiplier series untouched.
    pub fn ingest_day(&mut self, day: &DailyProfile) -> Result<(), ForecastError> {
        if day.len() != self.slots {
            return Err(ForecastError::LengthMismatch {
                expected: self.slots,
                got: day.len(),
            });
        }
        self.running_max = self.running_max.max(day.max());
        let normalized = match normalize_day(day) {
            Ok(n) => n,
            Err(ForecastError::AllZeroDay { .. }) => {
                self.multipliers.push(None);
                self.shape = self.shape.as_ref().map(ShapeState::skipped);
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let in_force = self
            .shape
            .as_ref()
            .map_or_else(|| normalized.clone(), |s| s.shape.clone());
        let multiplier =
            optimal_multiplier(&in_force, day).or_else(|_| optimal_multiplier(&normalized, day))?;
        self.history.push(HistoryDay {
            samples: day.samples().to_vec(),
            shape: in_force,
            multiplier,
        });
        self.multipliers.push(Some(multiplier));
        self.shape = Some(match &self.shape {
            Some(s) => update_shape(s, day)?,
            None => ShapeState::new(normalized, self.config.alpha, day.day_index() + 1)?,
        });
        self.refit();
        Ok(())
    }

    fn refit(&mut self) {
        let series: Vec<f64> = self.multipliers.iter().flatten().copied().collect();
        self.model = fit_arma11(&series);
        self.error_model = fit_error_model(&self.history, &self.config.sunrise, self.running_max)
            .unwrap_or_else(|_| ErrorModel::empty(self.slots));
        self.observation_variances =
            fit_observation_variances(&self.history, &self.config.sunrise, self.running_max);
    }

    /// Shape for the upcoming day (zeros before any lit day was seen).
    pub fn shape(&self) -> Vec<f64> {
        self.shape
            .as_ref()
            .map_or_else(|| vec![0.0; self.slots], |s| s.shape.clone())
    }

    pub fn multiplier_model(&self) -> &MultiplierModel {
        &self.model
    }

    /// Error model used for sampling; silenced under `zero_variance`.
    pub fn error_model(&self) -> ErrorModel {
        if self.config.zero_variance {
            self.error_model.silenced()
        } else {
            self.error_model.clone()
        }
    }

    pub fn observation_variances(&self) -> &ObservationVarianceTable {
        &self.observation_variances
    }

    pub fn history(&self) -> &[HistoryDay] {
        &self.history
    }

    /// Night prior of the upcoming day's multiplier.
    pub fn prior(&self) -> GaussianBelief {
        let p_prev = self
            .multipliers
            .iter()
            .flatten()
            .last()
            .copied()
            .unwrap_or(0.0);
        let belief = predict_night(&self.model, p_prev);
        if self.config.zero_variance {
            GaussianBelief::point(belief.mean)
        } else {
            belief
        }
    }

    /// Sunrise limit given today's production so far.
    pub fn sunrise_limit(&self, prefix: &[f64]) -> f64 {
        let today = prefix.iter().copied().fold(0.0, f64::max);
        self.config.sunrise.limit(self.running_max.max(today))
    }

    /// Detects sunrise in today's observed samples and fuses the daytime
    /// multiplier estimate with the night prior.
    pub fn intraday(&self, prefix: &[f64]) -> IntradayEstimate {
        let prior = self.prior();
        let sunrise = detect_sunrise(
            prefix,
            self.sunrise_limit(prefix),
            self.config.sunrise.consecutive,
        );
        let Some(rise) = sunrise else {
            return IntradayEstimate {
                sunrise: None,
                observation: None,
                observation_variance: None,
                fused: prior,
            };
        };
        let shape = self.shape();
        let observation = daytime_multiplier_estimate(&shape, &prefix[rise..], rise).ok();
        let m = prefix.len() - 1 - rise;
        let observation_variance = self.observation_variances.lookup(m);
        let fused = match (observation, observation_variance) {
            (Some(z), Some(v)) => fuse_bayes(prior, z, v),
            _ => prior,
        };
        IntradayEstimate {
            sunrise,
            observation,
            observation_variance,
            fused,
        }
    }

    pub fn snapshot(&self) -> ForecasterSnapshot {
        ForecasterSnapshot {
            config: self.config,
            days_ingested: self.days_ingested(),
            shape: self.shape.clone(),
            multipliers: self.multipliers.clone(),
            multiplier_model: self.model.clone(),
            error_model: self.error_model.clone(),
            observation_variances: self.observation_variances.clone(),
            running_max: self.running_max,
            next_day_prior: self.prior(),
        }
    }
}
