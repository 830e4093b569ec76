use serde::{Deserialize, Serialize};

/// Sunrise is declared when `consecutive` samples in a row exceed
/// `fraction` of the running dataset maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunriseRule {
    pub consecutive: usize,
    pub fraction: f64,
}

impl Default for SunriseRule {
    fn default() -> Self {
        Self {
            consecutive: 3,
            fraction: 0.01,
        }
    }
}

impl SunriseRule {
    pub fn limit(&self, running_max: f64) -> f64 {
        self.fraction * running_max
    }
}

/// First index `s` such that `samples[s..s + k]` all exceed `limit`.
pub fn detect_sunrise(samples: &[f64], limit: f64, k: usize) -> Option<usize> {
    let k = k.max(1);
    let mut run = 0;
    for (i, &v) in samples.iter().enumerate() {
        if v > limit {
            run += 1;
            if run == k {
                return Some(i + 1 - k);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Last index `e` such that `samples[e + 1 − k..=e]` all exceed `limit`.
pub fn detect_sunset(samples: &[f64], limit: f64, k: usize) -> Option<usize> {
    let k = k.max(1);
    let mut run = 0;
    for (i, &v) in samples.iter().enumerate().rev() {
        if v > limit {
            run += 1;
            if run == k {
                return Some(i + k - 1);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// `(sunrise, sunset)` of a complete day.
pub fn daylight_window(samples: &[f64], limit: f64, k: usize) -> Option<(usize, usize)> {
    Some((
        detect_sunrise(samples, limit, k)?,
        detect_sunset(samples, limit, k)?,
    ))
}
