//! Time bookkeeping. All times are seconds from the start of day 0.

use serde::{Deserialize, Serialize};

use crate::error::ForecastError;

/// Length of a day, the control step and the PV sampling step.
///
/// The day must be a whole number of control steps and the control step a
/// whole number of PV samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub day_seconds: f64,
    pub step_seconds: f64,
    pub pv_seconds: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            day_seconds: 86_400.0,
            step_seconds: 3_600.0,
            pv_seconds: 900.0,
        }
    }
}

fn whole_ratio(num: f64, den: f64) -> Option<usize> {
    if !(num > 0.0 && den > 0.0) {
        return None;
    }
    let r = num / den;
    let k = r.round();
    ((r - k).abs() < 1e-9 && k >= 1.0).then_some(k as usize)
}

impl TimeGrid {
    pub fn new(
        day_seconds: f64,
        step_seconds: f64,
        pv_seconds: f64,
    ) -> Result<Self, ForecastError> {
        let grid = Self {
            day_seconds,
            step_seconds,
            pv_seconds,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        if whole_ratio(self.day_seconds, self.step_seconds).is_none() {
            return Err(ForecastError::InvalidParameter(format!(
                "day length {} s is not a whole number of control steps of {} s",
                self.day_seconds, self.step_seconds
            )));
        }
        if whole_ratio(self.step_seconds, self.pv_seconds).is_none() {
            return Err(ForecastError::InvalidParameter(format!(
                "control step {} s is not a whole number of PV samples of {} s",
                self.step_seconds, self.pv_seconds
            )));
        }
        Ok(())
    }

    /// `N_pv`: PV samples per day.
    pub fn slots_per_day(&self) -> usize {
        (self.day_seconds / self.pv_seconds).round() as usize
    }

    /// Control steps per day.
    pub fn steps_per_day(&self) -> usize {
        (self.day_seconds / self.step_seconds).round() as usize
    }

    /// PV samples per control step.
    pub fn slots_per_step(&self) -> usize {
        (self.step_seconds / self.pv_seconds).round() as usize
    }

    pub fn pv_hours(&self) -> f64 {
        self.pv_seconds / 3_600.0
    }

    pub fn horizon(&self, t: f64) -> usize {
        horizon_length(t, self.day_seconds, self.step_seconds)
    }

    /// Day index and PV slot containing `t`.
    pub fn day_and_slot(&self, t: f64) -> (usize, usize) {
        let day = (t / self.day_seconds + 1e-12).floor();
        let within = t - day * self.day_seconds;
        let slot = ((within / self.pv_seconds) + 1e-9).floor() as usize;
        (day.max(0.0) as usize, slot.min(self.slots_per_day() - 1))
    }

    /// Control step of the day containing `t`.
    pub fn step_of_day(&self, t: f64) -> usize {
        let within = t.rem_euclid(self.day_seconds);
        (((within / self.step_seconds) + 1e-9).floor() as usize).min(self.steps_per_day() - 1)
    }
}

/// Shrinking horizon `N(t) = (T_day − t mod T_day)/Δt`, in control steps.
///
/// At midnight this is a full day, never zero.
pub fn horizon_length(t: f64, day_seconds: f64, step_seconds: f64) -> usize {
    let within = t.rem_euclid(day_seconds);
    let remaining = day_seconds - within;
    let n = (remaining / step_seconds - 1e-9).ceil();
    (n.max(1.0)) as usize
}

/// Exact slot lookup of PV power at wall-clock time `t` in a multi-day
/// series of daily profiles (day 0 first). No interpolation.
pub fn pv_power_at(days: &[Vec<f64>], grid: &TimeGrid, t: f64) -> Result<f64, ForecastError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(ForecastError::OutOfRange { t });
    }
    let (day, slot) = grid.day_and_slot(t);
    days.get(day)
        .and_then(|d| d.get(slot))
        .copied()
        .ok_or(ForecastError::OutOfRange { t })
}
