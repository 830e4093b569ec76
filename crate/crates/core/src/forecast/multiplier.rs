use super::{DailyProfile, GaussianBelief, MultiplierModel};
use crate::error::ForecastError;

/// Closed-form 1-D least squares `argmin_p Σ (p·y − x)²` over paired slices.
fn scalar_least_squares(shape: &[f64], samples: &[f64]) -> Result<f64, ForecastError> {
    let (num, den) = shape
        .iter()
        .zip(samples)
        .fold((0.0, 0.0), |(n, d), (y, x)| (n + y * x, d + y * y));
    if den <= 0.0 {
        return Err(ForecastError::DegenerateShape);
    }
    Ok(num / den)
}

/// Optimal multiplier of a completed day: `(Σ Yⁱ Xⁱ) / (Σ (Yⁱ)²)`.
pub fn optimal_multiplier(shape: &[f64], day: &DailyProfile) -> Result<f64, ForecastError> {
    if shape.len() != day.len() {
        return Err(ForecastError::LengthMismatch {
            expected: shape.len(),
            got: day.len(),
        });
    }
    scalar_least_squares(shape, day.samples())
}

/// Multiplier estimate from the production observed since sunrise.
///
/// `window` holds `X^{s_r}, …, X^{s_r+m}`; the matching shape coordinates
/// start at `sunrise`.
pub fn daytime_multiplier_estimate(
    shape: &[f64],
    window: &[f64],
    sunrise: usize,
) -> Result<f64, ForecastError> {
    let end = sunrise + window.len();
    if end > shape.len() {
        return Err(ForecastError::LengthMismatch {
            expected: shape.len().saturating_sub(sunrise),
            got: window.len(),
        });
    }
    scalar_least_squares(&shape[sunrise..end], window)
}

/// Night prediction `p̂_η = μ + φ p_{η−1} + θ ε_{η−1}` with variance `σ²`.
pub fn predict_night(model: &MultiplierModel, p_prev: f64) -> GaussianBelief {
    let last_residual = model.residuals.last().copied().unwrap_or(0.0);
    GaussianBelief {
        mean: model.mu + model.phi * p_prev + model.theta * last_residual,
        variance: model.sigma2,
    }
}

/// `max(0, mean · Yⁱ)` for every slot.
pub fn point_forecast(shape: &[f64], belief: &GaussianBelief) -> Vec<f64> {
    shape.iter().map(|y| (belief.mean * y).max(0.0)).collect()
}
