//! AR(1) model of the daytime residuals `δⁱ_τ = Xⁱ_τ − p_τ Yⁱ_τ` and the
//! table of daytime-estimate variances `σ_m²`.

use serde::{Deserialize, Serialize};

use super::multiplier::daytime_multiplier_estimate;
use super::sunrise::{daylight_window, detect_sunrise, SunriseRule};
use crate::error::ForecastError;

pub const MIN_ERROR_HISTORY: usize = 5;

/// Floor applied to fitted variances so they stay strictly positive.
const VARIANCE_FLOOR: f64 = 1e-12;

/// A completed historical day with the shape that was in force for it and
/// its optimal multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryDay {
    pub samples: Vec<f64>,
    pub shape: Vec<f64>,
    pub multiplier: f64,
}

impl HistoryDay {
    pub fn residuals(&self) -> Vec<f64> {
        self.samples
            .iter()
            .zip(&self.shape)
            .map(|(x, y)| x - self.multiplier * y)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTerm {
    pub phi: f64,
    pub sigma2: f64,
}

/// Per-slot AR(1) coefficients for daytime slots; nighttime slots carry no
/// term and their error is exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub terms: Vec<Option<ErrorTerm>>,
    /// Slot whose error is pinned to zero when sampling at night (the slot
    /// before the first daytime slot).
    pub anchor: usize,
}

impl ErrorModel {
    /// A model with no daytime slots: every error is zero.
    pub fn empty(slots: usize) -> Self {
        Self {
            terms: vec![None; slots],
            anchor: 0,
        }
    }

    pub fn slots(&self) -> usize {
        self.terms.len()
    }

    pub fn term(&self, slot: usize) -> Option<&ErrorTerm> {
        self.terms.get(slot).and_then(|t| t.as_ref())
    }

    pub fn is_daytime(&self, slot: usize) -> bool {
        self.term(slot).is_some()
    }

    pub fn daytime_slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|_| i))
    }

    /// Same daytime classification with zero coefficients and variances.
    pub fn silenced(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    t.map(|_| ErrorTerm {
                        phi: 0.0,
                        sigma2: 0.0,
                    })
                })
                .collect(),
            anchor: self.anchor,
        }
    }
}

/// Fits the per-slot AR(1) model to residual histories.
///
/// For each daytime slot `i`, `φ_i` is the no-intercept regression of
/// `δⁱ` on `δⁱ⁻¹` across days and `σ²_i` the sample variance of the
/// regression residuals.
pub fn fit_error_model_from_residuals(
    deltas: &[Vec<f64>],
    daytime: &[bool],
) -> Result<ErrorModel, ForecastError> {
    if deltas.len() < MIN_ERROR_HISTORY {
        return Err(ForecastError::InsufficientHistory {
            needed: MIN_ERROR_HISTORY,
            available: deltas.len(),
        });
    }
    let slots = daytime.len();
    if let Some(bad) = deltas.iter().find(|d| d.len() != slots) {
        return Err(ForecastError::LengthMismatch {
            expected: slots,
            got: bad.len(),
        });
    }
    let mut terms = vec![None; slots];
    for i in (0..slots).filter(|&i| daytime[i]) {
        let prev = |d: &Vec<f64>| if i == 0 { 0.0 } else { d[i - 1] };
        let (sxy, sxx) = deltas.iter().fold((0.0, 0.0), |(sxy, sxx), d| {
            (sxy + d[i] * prev(d), sxx + prev(d) * prev(d))
        });
        let phi = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let resid: Vec<f64> = deltas.iter().map(|d| d[i] - phi * prev(d)).collect();
        let n = resid.len() as f64;
        let mean = resid.iter().sum::<f64>() / n;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        terms[i] = Some(ErrorTerm {
            phi,
            sigma2: var.max(VARIANCE_FLOOR),
        });
    }
    let anchor = daytime
        .iter()
        .position(|&d| d)
        .map_or(0, |i| i.saturating_sub(1));
    Ok(ErrorModel { terms, anchor })
}

/// Fits the error model to historical days.
///
/// A slot counts as daytime when it lies strictly after sunrise and no later
/// than sunset on at least half of the days that have a daylight window.
pub fn fit_error_model(
    history: &[HistoryDay],
    rule: &SunriseRule,
    running_max: f64,
) -> Result<ErrorModel, ForecastError> {
    if history.len() < MIN_ERROR_HISTORY {
        return Err(ForecastError::InsufficientHistory {
            needed: MIN_ERROR_HISTORY,
            available: history.len(),
        });
    }
    let slots = history[0].samples.len();
    let limit = rule.limit(running_max);
    let mut counts = vec![0usize; slots];
    let mut lit_days = 0usize;
    for day in history {
        if let Some((rise, set)) = daylight_window(&day.samples, limit, rule.consecutive) {
            lit_days += 1;
            for c in counts.iter_mut().take(set + 1).skip(rise + 1) {
                *c += 1;
            }
        }
    }
    let daytime: Vec<bool> = counts
        .iter()
        .map(|&c| lit_days > 0 && 2 * c >= lit_days)
        .collect();
    let deltas: Vec<Vec<f64>> = history.iter().map(HistoryDay::residuals).collect();
    fit_error_model_from_residuals(&deltas, &daytime)
}

/// `σ_m²` per number of elapsed daytime steps `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationVarianceTable {
    pub sigma2: Vec<Option<f64>>,
}

impl ObservationVarianceTable {
    pub fn empty(slots: usize) -> Self {
        Self {
            sigma2: vec![None; slots],
        }
    }

    /// Variance for `m`, borrowing from the nearest populated `m` (ties go
    /// to the smaller one). `None` when the table is empty.
    pub fn lookup(&self, m: usize) -> Option<f64> {
        let n = self.sigma2.len();
        if n == 0 {
            return None;
        }
        let m = m.min(n - 1);
        for offset in 0..n {
            if offset <= m {
                if let Some(v) = self.sigma2[m - offset] {
                    return Some(v);
                }
            }
            if let Some(Some(v)) = self.sigma2.get(m + offset) {
                return Some(*v);
            }
        }
        None
    }
}

/// Tabulates `σ_m² = mean((p_τ − p̂^m_τ)²)` over historical days, where
/// `p̂^m_τ` is the least-squares multiplier from the first `m + 1` samples
/// after that day's sunrise. Entries with fewer than two samples stay empty.
pub fn fit_observation_variances(
    history: &[HistoryDay],
    rule: &SunriseRule,
    running_max: f64,
) -> ObservationVarianceTable {
    let slots = history.first().map_or(0, |d| d.samples.len());
    let limit = rule.limit(running_max);
    let mut sums = vec![0.0; slots];
    let mut counts = vec![0usize; slots];
    for day in history {
        let Some(rise) = detect_sunrise(&day.samples, limit, rule.consecutive) else {
            continue;
        };
        for m in 0..slots - rise {
            let window = &day.samples[rise..=rise + m];
            if let Ok(estimate) = daytime_multiplier_estimate(&day.shape, window, rise) {
                let e = day.multiplier - estimate;
                sums[m] += e * e;
                counts[m] += 1;
            }
        }
    }
    let sigma2 = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c >= 2).then(|| (s / c as f64).max(VARIANCE_FLOOR)))
        .collect();
    ObservationVarianceTable { sigma2 }
}
