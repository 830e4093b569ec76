//! Equally weighted PV scenarios over the rest of the day.
//!
//! A daytime sample is `Xⁱ = max(0, p·Yⁱ + δⁱ)` with the error chain
//! `δⁱ = φ_i δⁱ⁻¹ + εⁱ` running over daytime slots after an anchor slot whose
//! error is zero. At night `p` comes from the ARMA prior and the whole chain
//! is sampled. After sunrise `p` comes from the posterior given the observed
//! production, the chain up to the last observation is reconstructed from
//! `p`, and only the future innovations are sampled.
//!
//! Scenario `k` uses its own ChaCha stream seeded with `base_seed + k`, so a
//! scenario does not depend on how many others are drawn or on evaluation
//! order.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::ForecastError;
use crate::forecast::{ErrorModel, GaussianBelief};
use crate::time::TimeGrid;
use crate::Exec;

pub type MultiplierPosterior = GaussianBelief;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Night,
    Day,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Power (kW) for slots `start_slot..N_pv` of the set.
    pub pv_power: Vec<f64>,
    pub seed: u64,
    pub multiplier_draw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    /// First slot of the day covered by every scenario.
    pub start_slot: usize,
    pub mode: SamplingMode,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn horizon_slots(&self) -> usize {
        self.scenarios.first().map_or(0, |s| s.pv_power.len())
    }

    /// A one-member set holding a deterministic trajectory.
    pub fn single(pv_power: Vec<f64>, start_slot: usize, mode: SamplingMode) -> Self {
        Self {
            scenarios: vec![Scenario {
                pv_power,
                seed: 0,
                multiplier_draw: f64::NAN,
            }],
            start_slot,
            mode,
        }
    }

    /// Power of scenario `k` at time `t` (exact slot lookup within the day).
    pub fn power_at(&self, k: usize, grid: &TimeGrid, t: f64) -> Result<f64, ForecastError> {
        let (_, slot) = grid.day_and_slot(t);
        let scenario = self
            .scenarios
            .get(k)
            .ok_or(ForecastError::OutOfRange { t })?;
        slot.checked_sub(self.start_slot)
            .and_then(|i| scenario.pv_power.get(i))
            .copied()
            .ok_or(ForecastError::OutOfRange { t })
    }

    /// CSV with header `scenario,slot,power_kw`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), crate::IoError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scenario", "slot", "power_kw"])?;
        for (k, s) in self.scenarios.iter().enumerate() {
            for (i, p) in s.pv_power.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    (self.start_slot + i).to_string(),
                    p.to_string(),
                ])?;
            }
        }
        w.flush().map_err(crate::IoError::from)?;
        Ok(())
    }
}

/// Gaussian posterior of the multiplier given the production observed after
/// sunrise.
///
/// `observed` holds `X⁰..X^{i_c}`. For each daytime slot `i` in
/// `sunrise+1..=i_c` the innovation `εⁱ = Xⁱ − pYⁱ − φ_i δⁱ⁻¹` is affine in
/// `p` (`δⁱ⁻¹` is itself `Xⁱ⁻¹ − pYⁱ⁻¹`, or zero at the anchor and at night
/// slots), so the product of the prior and the innovation densities is
/// Gaussian with
///
/// ```text
/// precision = 1/σ² + Σ rᵢ²/σᵢ²,   mean = (p̂/σ² + Σ rᵢ zᵢ/σᵢ²) / precision
/// ```
///
/// where `rᵢ = Yⁱ − φ_i Yⁱ⁻¹` and `zᵢ = Xⁱ − φ_i Xⁱ⁻¹`.
pub fn posterior_after_observations(
    prior: GaussianBelief,
    shape: &[f64],
    error_model: &ErrorModel,
    observed: &[f64],
    sunrise: usize,
) -> MultiplierPosterior {
    if prior.is_point() {
        return prior;
    }
    let mut precision = prior.precision();
    let mut weighted = prior.mean / prior.variance;
    let mut used = 0;
    for i in (sunrise + 1)..observed.len().min(shape.len()) {
        let Some(term) = error_model.term(i) else {
            continue;
        };
        if !(term.sigma2 > 0.0) {
            continue;
        }
        let chained = i - 1 > sunrise && error_model.is_daytime(i - 1);
        let (z, r) = if chained {
            (
                observed[i] - term.phi * observed[i - 1],
                shape[i] - term.phi * shape[i - 1],
            )
        } else {
            (observed[i], shape[i])
        };
        precision += r * r / term.sigma2;
        weighted += r * z / term.sigma2;
        used += 1;
    }
    if used == 0 {
        return prior;
    }
    let variance = 1.0 / precision;
    GaussianBelief {
        mean: variance * weighted,
        variance,
    }
}

fn draw(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Walks one day. Slots `< observed.len()` are fixed by observations; the
/// chain is reconstructed there from `p`. Innovations are drawn, in slot
/// order, for every later daytime slot.
fn sample_one(
    p: f64,
    shape: &[f64],
    error_model: &ErrorModel,
    anchor: usize,
    observed: &[f64],
    rng: &mut ChaCha8Rng,
    start_slot: usize,
) -> Vec<f64> {
    let slots = shape.len();
    let mut out = Vec::with_capacity(slots.saturating_sub(start_slot));
    let mut delta_prev = 0.0;
    for i in 0..slots {
        let delta = match error_model.term(i) {
            Some(term) if i > anchor => {
                if i < observed.len() {
                    observed[i] - p * shape[i]
                } else {
                    term.phi * delta_prev + term.sigma2.sqrt() * draw(rng)
                }
            }
            _ => 0.0,
        };
        if i >= start_slot {
            let x = if i < observed.len() {
                observed[i]
            } else {
                (p * shape[i] + delta).max(0.0)
            };
            out.push(x);
        }
        delta_prev = delta;
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn sample_set(
    belief: GaussianBelief,
    shape: &[f64],
    error_model: &ErrorModel,
    anchor: usize,
    observed: &[f64],
    count: usize,
    base_seed: u64,
    start_slot: usize,
    mode: SamplingMode,
    exec: Exec,
) -> ScenarioSet {
    let sd = belief.std_dev();
    let scenarios = exec.map_indexed(count.max(1), |k| {
        let seed = base_seed.wrapping_add(k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = belief.mean + sd * draw(&mut rng);
        let pv_power = sample_one(
            p,
            shape,
            error_model,
            anchor,
            observed,
            &mut rng,
            start_slot,
        );
        Scenario {
            pv_power,
            seed,
            multiplier_draw: p,
        }
    });
    ScenarioSet {
        scenarios,
        start_slot,
        mode,
    }
}

/// Night sampling from the ARMA prior and the full error chain.
pub fn sample_night(
    prior: GaussianBelief,
    shape: &[f64],
    error_model: &ErrorModel,
    count: usize,
    base_seed: u64,
    start_slot: usize,
    exec: Exec,
) -> ScenarioSet {
    sample_set(
        prior,
        shape,
        error_model,
        error_model.anchor,
        &[],
        count,
        base_seed,
        start_slot,
        SamplingMode::Night,
        exec,
    )
}

/// Daytime sampling conditioned on `observed = X⁰..X^{i_c}`.
#[allow(clippy::too_many_arguments)]
pub fn sample_day(
    posterior: MultiplierPosterior,
    shape: &[f64],
    error_model: &ErrorModel,
    observed: &[f64],
    sunrise: usize,
    count: usize,
    base_seed: u64,
    start_slot: usize,
    exec: Exec,
) -> ScenarioSet {
    sample_set(
        posterior,
        shape,
        error_model,
        sunrise,
        observed,
        count,
        base_seed,
        start_slot,
        SamplingMode::Day,
        exec,
    )
}
