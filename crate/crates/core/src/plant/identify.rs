use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    discretize, matrix_log, pump_outlet_pressure, simulate_step, LinearPlantModel,
    NonlinearNetwork, PlantState,
};
use crate::error::PlantError;

/// Minimum number of experiment steps for identification from a network.
pub const MIN_EXPERIMENT_STEPS: usize = 200;

const MAX_CONDITION: f64 = 1e8;

/// Randomized one-step experiments: initial levels, pump flows and demand
/// are drawn uniformly from the operating box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExcitationDesign {
    pub samples: usize,
    pub holdout: usize,
    pub seed: u64,
    pub level_min: Vec<f64>,
    pub level_max: Vec<f64>,
    pub flow_max: Vec<f64>,
    pub demand_min: f64,
    pub demand_max: f64,
}

impl Default for ExcitationDesign {
    fn default() -> Self {
        Self {
            samples: 400,
            holdout: 200,
            seed: 7,
            level_min: vec![1.0, 1.0],
            level_max: vec![3.0, 2.8],
            flow_max: vec![100.0, 100.0],
            demand_min: 20.0,
            demand_max: 100.0,
        }
    }
}

impl ExcitationDesign {
    pub fn validate(&self, net: &NonlinearNetwork) -> Result<(), PlantError> {
        let n = net.n_states();
        if self.level_min.len() != n
            || self.level_max.len() != n
            || self.flow_max.len() != net.n_pumps()
        {
            return Err(PlantError::Dimension(
                "excitation box does not match the network".into(),
            ));
        }
        if self.samples < MIN_EXPERIMENT_STEPS {
            return Err(PlantError::TooFewSamples {
                needed: MIN_EXPERIMENT_STEPS,
                got: self.samples,
            });
        }
        let ordered = self
            .level_min
            .iter()
            .zip(&self.level_max)
            .all(|(lo, hi)| lo <= hi)
            && self.flow_max.iter().all(|f| *f >= 0.0)
            && 0.0 <= self.demand_min
            && self.demand_min <= self.demand_max;
        if !ordered {
            return Err(PlantError::InvalidInput(
                "excitation ranges must be ordered and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One recorded experiment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSample {
    pub h0: Vec<f64>,
    pub u: Vec<f64>,
    pub d_a: f64,
    pub h1: Vec<f64>,
    pub p_out: Vec<f64>,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub model: LinearPlantModel,
    /// R² of the level increments, per tank.
    pub r2_state: Vec<f64>,
    /// R² of the outlet pressures, per pump.
    pub r2_pressure: Vec<f64>,
    pub condition_number: f64,
    pub samples_used: usize,
    pub samples_discarded: usize,
    /// One-step level prediction RMSE on held-out experiments, per tank.
    pub holdout_rmse: Vec<f64>,
    /// Holdout RMSE relative to the excitation level span.
    pub holdout_rmse_fraction: Vec<f64>,
    /// R² of the held-out level increments, per tank.
    pub holdout_r2: Vec<f64>,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Runs `count` randomized one-step experiments on the network.
pub fn generate_experiment(
    net: &NonlinearNetwork,
    design: &ExcitationDesign,
    dt: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<ExperimentSample>, PlantError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let h0: Vec<f64> = design
                .level_min
                .iter()
                .zip(&design.level_max)
                .map(|(lo, hi)| uniform(&mut rng, *lo, *hi))
                .collect();
            let u: Vec<f64> = design
                .flow_max
                .iter()
                .map(|hi| uniform(&mut rng, 0.0, *hi))
                .collect();
            let d_a = uniform(&mut rng, design.demand_min, design.demand_max);
            let state = PlantState::new(h0.clone());
            let p_out = pump_outlet_pressure(net, &state, &u);
            let out = simulate_step(net, &state, &u, d_a, dt)?;
            Ok(ExperimentSample {
                h0,
                u,
                d_a,
                h1: out.state.h,
                p_out,
                clipped: !out.violations.is_empty(),
            })
        })
        .collect()
}

fn condition_number(x: &DMatrix<f64>) -> f64 {
    let sv = x.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64), PlantError> {
    let cond = condition_number(x);
    if !(cond <= MAX_CONDITION) {
        return Err(PlantError::IllConditioned { cond });
    }
    let theta = x
        .clone()
        .svd(true, true)
        .solve(y, 0.0)
        .map_err(|e| PlantError::InvalidInput(e.to_string()))?;
    Ok((theta, cond))
}

fn r_squared(y: &DMatrix<f64>, fit: &DMatrix<f64>) -> Vec<f64> {
    (0..y.ncols())
        .map(|j| {
            let col = y.column(j);
            let mean = col.mean();
            let ss_tot: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let ss_res: f64 = col
                .iter()
                .zip(fit.column(j).iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            if ss_tot > 0.0 {
                1.0 - ss_res / ss_tot
            } else if ss_res == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Fits the linear model to recorded experiments. Samples with clipped
/// levels are ignored.
///
/// The level increments are regressed on `[h; u; d_a]`, which identifies the
/// discrete map at `dt` exactly when the data is linear. The continuous
/// matrices follow from the matrix logarithm of `A_d` and the inverse of
/// the input integral `∫₀^dt e^{As} ds`. Pressures are regressed on
/// `[h; u; 1]`.
///
/// Returns the model, the state and pressure R² values and the worst
/// regressor condition number.
#[allow(clippy::type_complexity)]
pub fn identify_from_samples(
    samples: &[ExperimentSample],
    dt: f64,
    p_in: Vec<f64>,
    power_factor: f64,
) -> Result<(LinearPlantModel, Vec<f64>, Vec<f64>, f64), PlantError> {
    let used: Vec<&ExperimentSample> = samples.iter().filter(|s| !s.clipped).collect();
    let first = used
        .first()
        .ok_or(PlantError::TooFewSamples { needed: 1, got: 0 })?;
    let n = first.h0.len();
    let m = first.u.len();
    if used.len() < n + m + 2 {
        return Err(PlantError::TooFewSamples {
            needed: n + m + 2,
            got: used.len(),
        });
    }
    if used
        .iter()
        .any(|s| s.h0.len() != n || s.h1.len() != n || s.u.len() != m || s.p_out.len() != m)
    {
        return Err(PlantError::Dimension(
            "experiment samples have inconsistent sizes".into(),
        ));
    }
    let rows = used.len();
    let xs = DMatrix::from_fn(rows, n + m + 1, |r, c| {
        let s = used[r];
        if c < n {
            s.h0[c]
        } else if c < n + m {
            s.u[c - n]
        } else {
            s.d_a
        }
    });
    let dh = DMatrix::from_fn(rows, n, |r, c| used[r].h1[c] - used[r].h0[c]);
    let (theta, cond_state) = least_squares(&xs, &dh)?;
    let r2_state = r_squared(&dh, &(&xs * &theta));
    let theta_t = theta.transpose();
    let ad = DMatrix::identity(n, n) + theta_t.view((0, 0), (n, n));
    let bd = theta_t.view((0, n), (n, m + 1)).into_owned();

    let a = matrix_log(&ad).ok_or(PlantError::NoContinuousModel)? / dt;
    let (_, gamma, _) = discretize(&a, &DMatrix::identity(n, n), &DMatrix::zeros(n, 1), dt)?;
    let b = gamma.try_inverse().ok_or(PlantError::NoContinuousModel)? * bd;
    let b1 = b.view((0, 0), (n, m)).into_owned();
    let b2 = b.view((0, m), (n, 1)).into_owned();

    let xp = DMatrix::from_fn(rows, n + m + 1, |r, c| {
        let s = used[r];
        if c < n {
            s.h0[c]
        } else if c < n + m {
            s.u[c - n]
        } else {
            1.0
        }
    });
    let yp = DMatrix::from_fn(rows, m, |r, c| used[r].p_out[c]);
    let (phi, cond_out) = least_squares(&xp, &yp)?;
    let r2_pressure = r_squared(&yp, &(&xp * &phi));
    let phi_t = phi.transpose();
    let cp = phi_t.view((0, 0), (m, n)).into_owned();
    let dp = phi_t.view((0, n), (m, m)).into_owned();
    let p_offset = phi_t.column(n + m).iter().copied().collect();

    let model = LinearPlantModel::new(a, b1, b2, cp, dp, p_offset, p_in, dt, power_factor)?;
    Ok((model, r2_state, r2_pressure, cond_state.max(cond_out)))
}

/// Identifies the controller model from randomized experiments on the
/// network and scores it on a held-out experiment set.
pub fn identify_linear_model(
    net: &NonlinearNetwork,
    design: &ExcitationDesign,
    dt: f64,
) -> Result<IdentificationReport, PlantError> {
    net.validate()?;
    design.validate(net)?;
    let train = generate_experiment(net, design, dt, design.samples, design.seed)?;
    let p_in = net.pumps.iter().map(|p| p.inlet_pressure).collect();
    let (model, r2_state, r2_pressure, condition_number) =
        identify_from_samples(&train, dt, p_in, net.power_factor)?;
    let samples_used = train.iter().filter(|s| !s.clipped).count();

    let test = generate_experiment(net, design, dt, design.holdout, design.seed.wrapping_add(1))?;
    let n = net.n_states();
    let usable: Vec<&ExperimentSample> = test.iter().filter(|s| !s.clipped).collect();
    let count = usable.len();
    let mut sq = vec![0.0; n];
    let mut mean_step = vec![0.0; n];
    for s in &usable {
        let pred = model.step(&s.h0, &s.u, s.d_a);
        for j in 0..n {
            sq[j] += (pred[j] - s.h1[j]).powi(2);
            mean_step[j] += (s.h1[j] - s.h0[j]) / count.max(1) as f64;
        }
    }
    let holdout_r2 = (0..n)
        .map(|j| {
            let total: f64 = usable
                .iter()
                .map(|s| (s.h1[j] - s.h0[j] - mean_step[j]).powi(2))
                .sum();
            if total > 0.0 {
                1.0 - sq[j] / total
            } else {
                0.0
            }
        })
        .collect();
    let holdout_rmse: Vec<f64> = sq
        .iter()
        .map(|v| (v / count.max(1) as f64).sqrt())
        .collect();
    let holdout_rmse_fraction = holdout_rmse
        .iter()
        .zip(design.level_min.iter().zip(&design.level_max))
        .map(|(r, (lo, hi))| r / (hi - lo))
        .collect();
    Ok(IdentificationReport {
        model,
        r2_state,
        r2_pressure,
        condition_number,
        samples_used,
        samples_discarded: train.len() - samples_used,
        holdout_rmse,
        holdout_rmse_fraction,
        holdout_r2,
    })
}
