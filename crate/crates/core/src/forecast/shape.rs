use serde::{Deserialize, Serialize};

use super::DailyProfile;
use crate::error::ForecastError;

/// EWMA of normalized daily production, `Y_η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeState {
    pub shape: Vec<f64>,
    pub alpha: f64,
    /// Day the shape applies to.
    pub day_index: usize,
}

impl ShapeState {
    pub fn new(shape: Vec<f64>, alpha: f64, day_index: usize) -> Result<Self, ForecastError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ForecastError::InvalidParameter(format!(
                "alpha {alpha} outside [0, 1]"
            )));
        }
        if shape.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ForecastError::InvalidParameter(
                "shape coordinates must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            shape,
            alpha,
            day_index,
        })
    }

    /// The state carried over a dark day: same shape, next day.
    pub fn skipped(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            alpha: self.alpha,
            day_index: self.day_index + 1,
        }
    }
}

/// `X' = X / max(X)`.
pub fn normalize_day(day: &DailyProfile) -> Result<Vec<f64>, ForecastError> {
    let max = day.max();
    if max <= 0.0 {
        return Err(ForecastError::AllZeroDay {
            day: day.day_index(),
        });
    }
    Ok(day.samples().iter().map(|v| v / max).collect())
}

/// `Y_η = α X'_{η−1} + (1 − α) Y_{η−1}`.
///
/// On [`ForecastError::AllZeroDay`] the caller keeps the shape and moves on
/// with [`ShapeState::skipped`].
pub fn update_shape(state: &ShapeState, day: &DailyProfile) -> Result<ShapeState, ForecastError> {
    if day.len() != state.shape.len() {
        return Err(ForecastError::LengthMismatch {
            expected: state.shape.len(),
            got: day.len(),
        });
    }
    let normalized = normalize_day(day)?;
    let a = state.alpha;
    let shape = normalized
        .iter()
        .zip(&state.shape)
        .map(|(x, y)| (a * x + (1.0 - a) * y).clamp(0.0, 1.0))
        .collect();
    Ok(ShapeState {
        shape,
        alpha: a,
        day_index: state.day_index + 1,
    })
}
