use serde::{Deserialize, Serialize};

use super::cost::{CostEvaluator, WeightedScenarios};
use super::mpc::check_dims;
use super::MpcConfig;
use crate::error::ControlError;
use crate::optimizer::{minimize, NlpProblem};
use crate::plant::LinearPlantModel;
use crate::scenario::{SamplingMode, ScenarioSet};

const MAX_OUTER: usize = 50;

/// Optimal one-day trajectory that ends where it starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicReference {
    /// `u*_0..u*_{M−1}`, one per control step of the day.
    pub inputs: Vec<Vec<f64>>,
    /// `h*_0..h*_M`.
    pub states: Vec<Vec<f64>>,
    /// `h*_M`, the centre of the terminal ball.
    pub anchor: Vec<f64>,
    /// `‖h*_0 − h*_M‖`.
    pub residual: f64,
    /// Day cost without the periodicity terms.
    pub objective: f64,
    pub outer_iterations: usize,
}

/// Solves the one-day problem over `(u_0..u_{M−1}, h_0)` with
/// `h_0 = h_M` enforced by an augmented Lagrangian: a quadratic penalty of
/// weight `w_P` plus multiplier updates until the gap closes.
///
/// `pv` is an optional PV profile for the day on the PV grid (zero when
/// absent).
pub fn solve_periodic(
    model: &LinearPlantModel,
    config: &MpcConfig,
    demand: &[f64],
    price: &[f64],
    pv: Option<&[f64]>,
) -> Result<PeriodicReference, ControlError> {
    config.validate()?;
    check_dims(model, config)?;
    let steps = config.grid.steps_per_day();
    let slots = config.grid.slots_per_day();
    if demand.len() < steps || price.len() < steps {
        return Err(ControlError::Coverage(format!(
            "periodic problem needs {steps} demand and price values"
        )));
    }
    let profile = match pv {
        Some(p) if p.len() >= slots => p[..slots].to_vec(),
        Some(p) => {
            return Err(ControlError::Coverage(format!(
                "PV profile has {} of {slots} slots",
                p.len()
            )));
        }
        None => vec![0.0; slots],
    };
    let set = ScenarioSet::single(profile, 0, SamplingMode::Night);
    let eval = CostEvaluator::new(
        model,
        config,
        steps,
        demand,
        price,
        WeightedScenarios::from_set(&set, slots),
    );
    let n = config.n_states();
    let m = config.n_inputs();
    let nu = steps * m;
    let mut lower = vec![0.0; nu];
    let mut upper: Vec<f64> = (0..steps)
        .flat_map(|_| config.u_max.iter().copied())
        .collect();
    lower.extend_from_slice(&config.h_min);
    upper.extend_from_slice(&config.h_max);
    let mut x: Vec<f64> = upper[..nu].iter().map(|u| 0.5 * u).collect();
    x.extend(
        config
            .h_min
            .iter()
            .zip(&config.h_max)
            .map(|(a, b)| 0.5 * (a + b)),
    );

    let weight = config.periodic_weight;
    let mut multiplier = vec![0.0; n];
    let mut outer_iterations = 0;
    let gap = |x: &[f64]| -> Vec<f64> {
        let h = eval.states(&x[nu..], &x[..nu]);
        x[nu..]
            .iter()
            .zip(&h[steps * n..])
            .map(|(a, b)| a - b)
            .collect()
    };
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_OUTER {
        outer_iterations += 1;
        let lam = multiplier.clone();
        let objective = |z: &[f64], g: &mut [f64]| {
            let (gu, gh) = g.split_at_mut(nu);
            let (u, h0) = z.split_at(nu);
            let mut end_grad = Vec::new();
            let mut terminal = |h_end: &[f64], grad: &mut [f64]| {
                let mut v = 0.0;
                end_grad.clear();
                for k in 0..n {
                    let c = h0[k] - h_end[k];
                    v += lam[k] * c + 0.5 * weight * c * c;
                    let dc = lam[k] + weight * c;
                    grad[k] -= dc;
                    end_grad.push(dc);
                }
                v
            };
            let value = eval.evaluate(h0, u, &mut terminal, gu, Some(gh)).value;
            for k in 0..n {
                gh[k] += end_grad[k];
            }
            value
        };
        let mut nlp = NlpProblem::new(lower.clone(), upper.clone(), x.clone(), objective)
            .map_err(|e| ControlError::InvalidConfig(e.to_string()))?;
        let report = minimize(&mut nlp, &config.solver);
        x = report.x;
        let c = gap(&x);
        let previous = residual;
        residual = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..n {
            multiplier[k] += weight * c[k];
        }
        if residual <= 1e-9 || (residual <= 1e-6 && residual >= 0.5 * previous) {
            break;
        }
    }
    if !(residual <= config.periodic_tolerance) {
        return Err(ControlError::PeriodicityGap { residual });
    }
    let (u, h0) = x.split_at(nu);
    let mut zero_grad = vec![0.0; nu];
    let objective = eval
        .evaluate(h0, u, &mut |_, _| 0.0, &mut zero_grad, None)
        .value;
    let h = eval.states(h0, u);
    let states: Vec<Vec<f64>> = h.chunks(n).map(<[f64]>::to_vec).collect();
    Ok(PeriodicReference {
        inputs: u.chunks(m).map(<[f64]>::to_vec).collect(),
        anchor: states[steps].clone(),
        states,
        residual,
        objective,
        outer_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{identify_linear_model, ExcitationDesign, NonlinearNetwork};

    #[test]
    fn reference_closes_and_replays() {
        let model = identify_linear_model(
            &NonlinearNetwork::surrogate(),
            &ExcitationDesign::default(),
            3600.0,
        )
        .unwrap()
        .model;
        let config = MpcConfig::default();
        let price: Vec<f64> = (0..24)
            .map(|j| if (6..22).contains(&j) { 0.3 } else { 0.12 })
            .collect();
        let r = solve_periodic(&model, &config, &[60.0; 24], &price, None).unwrap();
        assert!(r.residual <= 1e-6, "{}", r.residual);
        let replay = model.simulate(&r.states[0], &r.inputs, &[60.0; 24]);
        for (a, b) in replay.iter().zip(&r.states) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-9);
            }
        }
        // cheap night hours carry most of the pumping
        let night: f64 = r
            .inputs
            .iter()
            .enumerate()
            .filter(|(j, _)| !(6..22).contains(j))
            .map(|(_, u)| u.iter().sum::<f64>())
            .sum::<f64>()
            / 8.0;
        let day: f64 = r
            .inputs
            .iter()
            .enumerate()
            .filter(|(j, _)| (6..22).contains(j))
            .map(|(_, u)| u.iter().sum::<f64>())
            .sum::<f64>()
            / 16.0;
        assert!(night > day, "night {night} day {day}");
    }
}
