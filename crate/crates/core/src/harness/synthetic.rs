use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::time::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Clear,
    Cloudy,
}

/// Clear-sky bell with a day-to-day AR(1) amplitude and multiplicative
/// cloud dips on cloudy days. Power is in units of the clear-sky peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticPvGenerator {
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
    /// Exponent applied to the half-sine bell; larger is narrower.
    pub shape_exponent: f64,
    pub cloudy_probability: f64,
    /// Mean attenuation of a cloudy day.
    pub cloudy_attenuation: f64,
    /// Probability per PV slot that a dip starts on a cloudy day.
    pub dip_probability: f64,
    pub dip_depth_min: f64,
    pub dip_depth_max: f64,
    pub dip_slots_min: usize,
    pub dip_slots_max: usize,
    pub amplitude_phi: f64,
    pub amplitude_sigma: f64,
    /// Relative sample-to-sample noise.
    pub jitter: f64,
}

impl Default for SyntheticPvGenerator {
    fn default() -> Self {
        Self {
            sunrise_hour: 6.0,
            sunset_hour: 20.0,
            shape_exponent: 1.3,
            cloudy_probability: 0.3,
            cloudy_attenuation: 0.6,
            dip_probability: 0.12,
            dip_depth_min: 0.3,
            dip_depth_max: 0.8,
            dip_slots_min: 2,
            dip_slots_max: 8,
            amplitude_phi: 0.6,
            amplitude_sigma: 0.06,
            jitter: 0.02,
        }
    }
}

/// Daily PV series on the PV grid with their weather labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvDataset {
    pub days: Vec<Vec<f64>>,
    pub weather: Vec<Option<Weather>>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl SyntheticPvGenerator {
    pub fn validate(&self) -> Result<(), String> {
        let ok = 0.0 <= self.sunrise_hour
            && self.sunrise_hour < self.sunset_hour
            && self.sunset_hour <= 24.0
            && self.shape_exponent > 0.0
            && (0.0..=1.0).contains(&self.cloudy_probability)
            && (0.0..=1.0).contains(&self.cloudy_attenuation)
            && (0.0..=1.0).contains(&self.dip_probability)
            && 0.0 <= self.dip_depth_min
            && self.dip_depth_min <= self.dip_depth_max
            && self.dip_depth_max <= 1.0
            && 1 <= self.dip_slots_min
            && self.dip_slots_min <= self.dip_slots_max
            && self.amplitude_phi.abs() < 1.0
            && self.amplitude_sigma >= 0.0
            && self.jitter >= 0.0;
        if ok {
            Ok(())
        } else {
            Err("PV generator parameters out of range".into())
        }
    }

    /// Clear-sky profile with unit peak.
    pub fn clear_sky(&self, grid: &TimeGrid) -> Vec<f64> {
        let hours = grid.pv_hours();
        (0..grid.slots_per_day())
            .map(|i| {
                let x = (i as f64 + 0.5) * hours;
                if x <= self.sunrise_hour || x >= self.sunset_hour {
                    0.0
                } else {
                    let phase = (x - self.sunrise_hour) / (self.sunset_hour - self.sunrise_hour);
                    (std::f64::consts::PI * phase)
                        .sin()
                        .powf(self.shape_exponent)
                }
            })
            .collect()
    }

    /// Generates `days` days. `labels` fixes the weather of the last
    /// `labels.len()` days; the others are drawn.
    pub fn generate(
        &self,
        grid: &TimeGrid,
        days: usize,
        seed: u64,
        labels: &[Weather],
    ) -> PvDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clear = self.clear_sky(grid);
        let mut amplitude = 1.0;
        let forced_from = days.saturating_sub(labels.len());
        let mut out = Vec::with_capacity(days);
        let mut weather = Vec::with_capacity(days);
        for d in 0..days {
            amplitude = (1.0
                + self.amplitude_phi * (amplitude - 1.0)
                + self.amplitude_sigma * normal(&mut rng))
            .clamp(0.5, 1.3);
            let drawn = if rng.random::<f64>() < self.cloudy_probability {
                Weather::Cloudy
            } else {
                Weather::Clear
            };
            let w = if d >= forced_from {
                labels[d - forced_from]
            } else {
                drawn
            };
            let level = match w {
                Weather::Clear => amplitude,
                Weather::Cloudy => amplitude * self.cloudy_attenuation,
            };
            let mut day: Vec<f64> = clear.iter().map(|c| c * level).collect();
            for v in day.iter_mut() {
                let noise = 1.0 + self.jitter * normal(&mut rng);
                *v = (*v * noise).max(0.0);
            }
            if w == Weather::Cloudy {
                let mut i = 0;
                while i < day.len() {
                    if rng.random::<f64>() < self.dip_probability {
                        let depth = rng.random_range(self.dip_depth_min..=self.dip_depth_max);
                        let len = rng.random_range(self.dip_slots_min..=self.dip_slots_max);
                        for v in day.iter_mut().skip(i).take(len) {
                            *v *= 1.0 - depth;
                        }
                        i += len;
                    } else {
                        i += 1;
                    }
                }
            }
            out.push(day);
            weather.push(Some(w));
        }
        PvDataset { days: out, weather }
    }
}

/// Aggregate demand profile per control step and the day-to-day deviation
/// process used to perturb it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandConfig {
    /// Base demand (L/s) per control step of the day.
    pub base: Vec<f64>,
    /// Number of sampled demand days the perturbations are drawn from.
    pub sample_days: usize,
    /// Relative deviation of a sampled day, AR(1) over the day.
    pub deviation_sigma: f64,
    pub deviation_phi: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self {
            base: vec![
                38.0, 34.0, 32.0, 32.0, 35.0, 45.0, 62.0, 78.0, 80.0, 74.0, 68.0, 65.0, 66.0, 64.0,
                62.0, 60.0, 63.0, 70.0, 78.0, 80.0, 72.0, 60.0, 50.0, 42.0,
            ],
            sample_days: 60,
            deviation_sigma: 0.08,
            deviation_phi: 0.7,
        }
    }
}

impl DemandConfig {
    /// Sampled demand days around the base profile.
    pub fn sample_days(&self, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.sample_days)
            .map(|_| {
                let mut dev = 0.0;
                let scale = (1.0 - self.deviation_phi * self.deviation_phi).sqrt();
                self.base
                    .iter()
                    .map(|b| {
                        dev = self.deviation_phi * dev
                            + scale * self.deviation_sigma * normal(&mut rng);
                        (b * (1.0 + dev)).max(0.0)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Slot-wise mean of equally long days.
pub fn mean_day(days: &[Vec<f64>]) -> Vec<f64> {
    let len = days.first().map_or(0, Vec::len);
    (0..len)
        .map(|i| days.iter().map(|d| d[i]).sum::<f64>() / days.len() as f64)
        .collect()
}

/// `base + (day − mean)`, clamped at zero.
pub fn perturbed_demand(base: &[f64], day: &[f64], mean: &[f64]) -> Vec<f64> {
    base.iter()
        .zip(day)
        .zip(mean)
        .map(|((b, d), m)| (b + (d - m)).max(0.0))
        .collect()
}

/// Two-level tariff: `night` from `night_start` to `night_end` (hours,
/// wrapping midnight), `day` otherwise.
pub fn two_level_tariff(
    grid: &TimeGrid,
    night: f64,
    day: f64,
    night_start: f64,
    night_end: f64,
) -> Vec<f64> {
    let step_h = grid.step_seconds / 3600.0;
    (0..grid.steps_per_day())
        .map(|j| {
            let hour = j as f64 * step_h;
            if hour >= night_start || hour < night_end {
                night
            } else {
                day
            }
        })
        .collect()
}

/// Multiplier making the dataset's mean daily PV energy equal
/// `pump_energy_per_day` (kWh), and the scaled dataset.
pub fn scale_pv_to_pump_average(
    days: &[Vec<f64>],
    pump_energy_per_day: f64,
    pv_hours: f64,
) -> (Vec<Vec<f64>>, f64) {
    let mean_energy = days
        .iter()
        .map(|d| d.iter().sum::<f64>() * pv_hours)
        .sum::<f64>()
        / days.len().max(1) as f64;
    let factor = if mean_energy > 0.0 {
        pump_energy_per_day / mean_energy
    } else {
        1.0
    };
    let scaled = days
        .iter()
        .map(|d| d.iter().map(|v| v * factor).collect())
        .collect();
    (scaled, factor)
}
