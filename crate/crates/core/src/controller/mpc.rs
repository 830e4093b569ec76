use std::io::Write;

use serde::{Deserialize, Serialize};

use super::cost::{terminal_penalty, CostEvaluator, WeightedScenarios};
use super::{MpcConfig, PeriodicReference};
use crate::error::ControlError;
use crate::optimizer::{minimize, NlpProblem, SolveStatus};
use crate::plant::LinearPlantModel;
use crate::scenario::ScenarioSet;

/// Data of one receding-horizon problem at wall-clock time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcProblem {
    pub t: f64,
    pub h0: Vec<f64>,
    /// Aggregate demand per control step, starting at `t`.
    pub demand: Vec<f64>,
    /// Electricity price per control step, starting at `t`.
    pub price: Vec<f64>,
    /// PV trajectories starting at the first PV slot of the current step.
    pub scenarios: ScenarioSet,
    /// Centre of the terminal ball.
    pub terminal_target: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    Converged,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSolution {
    /// `u_0..u_{N−1}`, each inside `[0, ū]`.
    pub inputs: Vec<Vec<f64>>,
    /// Predicted `h_1..h_N`.
    pub states: Vec<Vec<f64>>,
    pub objective: f64,
    /// Expected cost of each step.
    pub stage_costs: Vec<f64>,
    /// Total cost under each scenario of the set, in set order.
    pub scenario_costs: Vec<f64>,
    pub status: SolutionStatus,
    pub solver_status: SolveStatus,
    pub iterations: usize,
    pub pg_norm: f64,
    pub terminal_distance: f64,
    pub terminal_penalty: f64,
    pub barrier_saturated: bool,
}

impl ControlSolution {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_converged(&self) -> bool {
        self.status == SolutionStatus::Converged
    }

    /// CSV with header `step,u1,..,um,h1_pred,..,hn_pred,cost`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), crate::IoError> {
        let mut w = csv::Writer::from_writer(out);
        let m = self.inputs.first().map_or(0, Vec::len);
        let n = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["step".to_string()];
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.extend((1..=n).map(|i| format!("h{i}_pred")));
        header.push("cost".into());
        w.write_record(&header)?;
        for (j, (u, h)) in self.inputs.iter().zip(&self.states).enumerate() {
            let mut row = vec![j.to_string()];
            row.extend(u.iter().map(f64::to_string));
            row.extend(h.iter().map(f64::to_string));
            row.push(self.stage_costs[j].to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(crate::IoError::from)?;
        Ok(())
    }
}

pub(crate) fn check_dims(model: &LinearPlantModel, config: &MpcConfig) -> Result<(), ControlError> {
    if model.n_states() != config.n_states() || model.n_inputs() != config.n_inputs() {
        return Err(ControlError::InvalidConfig(format!(
            "controller is set up for {} levels and {} pumps, model has {} and {}",
            config.n_states(),
            config.n_inputs(),
            model.n_states(),
            model.n_inputs()
        )));
    }
    if (model.dt - config.grid.step_seconds).abs() > 1e-9 * config.grid.step_seconds {
        return Err(ControlError::InvalidConfig(format!(
            "model is discretized at {} s but the control step is {} s",
            model.dt, config.grid.step_seconds
        )));
    }
    Ok(())
}

fn evaluator<'a>(
    model: &LinearPlantModel,
    config: &'a MpcConfig,
    problem: &'a MpcProblem,
) -> Result<CostEvaluator<'a>, ControlError> {
    check_dims(model, config)?;
    let steps = config.grid.horizon(problem.t);
    let slots = steps * config.grid.slots_per_step();
    let n = config.n_states();
    if problem.h0.len() != n || problem.terminal_target.len() != n {
        return Err(ControlError::Coverage(format!(
            "level vectors must have {n} entries"
        )));
    }
    if problem.demand.len() < steps || problem.price.len() < steps {
        return Err(ControlError::Coverage(format!(
            "horizon of {steps} steps needs demand and price for every step"
        )));
    }
    if problem.scenarios.is_empty()
        || problem
            .scenarios
            .scenarios
            .iter()
            .any(|s| s.pv_power.len() < slots)
    {
        return Err(ControlError::Coverage(format!(
            "every scenario must cover {slots} PV slots"
        )));
    }
    let pv = WeightedScenarios::from_set(&problem.scenarios, slots);
    Ok(CostEvaluator::new(
        model,
        config,
        steps,
        &problem.demand,
        &problem.price,
        pv,
    ))
}

fn terminal_fn<'a>(
    config: &'a MpcConfig,
    problem: &'a MpcProblem,
) -> impl FnMut(&[f64], &mut [f64]) -> f64 + 'a {
    move |h, g| {
        terminal_penalty(
            h,
            &problem.terminal_target,
            config.terminal_radius,
            config.terminal_weight,
            Some(g),
        )
    }
}

/// Scenario-averaged cost of the stacked input sequence `u`: expected
/// electricity cost plus the level barriers and the terminal penalty.
pub fn expected_cost(
    model: &LinearPlantModel,
    config: &MpcConfig,
    problem: &MpcProblem,
    u: &[f64],
) -> Result<f64, ControlError> {
    let mut grad = vec![0.0; u.len()];
    expected_cost_gradient(model, config, problem, u, &mut grad)
}

/// [`expected_cost`] with its gradient in `u` written to `grad`.
pub fn expected_cost_gradient(
    model: &LinearPlantModel,
    config: &MpcConfig,
    problem: &MpcProblem,
    u: &[f64],
    grad: &mut [f64],
) -> Result<f64, ControlError> {
    let eval = evaluator(model, config, problem)?;
    let len = eval.steps() * config.n_inputs();
    if u.len() != len || grad.len() != len {
        return Err(ControlError::Coverage(format!(
            "input sequence must have {len} entries"
        )));
    }
    let mut terminal = terminal_fn(config, problem);
    Ok(eval
        .evaluate(&problem.h0, u, &mut terminal, grad, None)
        .value)
}

fn box_bounds(config: &MpcConfig, steps: usize) -> (Vec<f64>, Vec<f64>) {
    let upper: Vec<f64> = (0..steps)
        .flat_map(|_| config.u_max.iter().copied())
        .collect();
    (vec![0.0; upper.len()], upper)
}

fn stack(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

fn unstack(x: &[f64], width: usize) -> Vec<Vec<f64>> {
    x.chunks(width).map(<[f64]>::to_vec).collect()
}

/// Minimizes the expected cost over the input box.
///
/// State constraints are handled by the barriers, the terminal ball by a
/// penalty. The result is marked [`SolutionStatus::Fallback`] when the
/// solver stops without converging or the terminal penalty exceeds the
/// configured threshold; the returned inputs are box-feasible either way.
pub fn solve_mpc(
    model: &LinearPlantModel,
    config: &MpcConfig,
    problem: &MpcProblem,
    warm_start: Option<&[f64]>,
) -> Result<ControlSolution, ControlError> {
    let eval = evaluator(model, config, problem)?;
    let steps = eval.steps();
    let m = config.n_inputs();
    let n = config.n_states();
    let (lower, upper) = box_bounds(config, steps);
    let x0 = match warm_start {
        Some(w) if w.len() == steps * m => w.to_vec(),
        _ => upper.iter().map(|u| 0.5 * u).collect(),
    };
    let mut terminal = terminal_fn(config, problem);
    let objective =
        |x: &[f64], g: &mut [f64]| eval.evaluate(&problem.h0, x, &mut terminal, g, None).value;
    let mut nlp = NlpProblem::new(lower, upper, x0, objective)
        .map_err(|e| ControlError::InvalidConfig(e.to_string()))?;
    let report = minimize(&mut nlp, &config.solver);
    let x = report.x;

    let mut grad = vec![0.0; x.len()];
    let mut terminal = terminal_fn(config, problem);
    let final_eval = eval.evaluate(&problem.h0, &x, &mut terminal, &mut grad, None);
    let h = eval.states(&problem.h0, &x);
    let h_end = &h[steps * n..];
    let terminal_distance = h_end
        .iter()
        .zip(&problem.terminal_target)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let terminal_cost = terminal_penalty(
        h_end,
        &problem.terminal_target,
        config.terminal_radius,
        config.terminal_weight,
        None,
    );

    let shared = eval.total_barrier(&problem.h0, &x) + terminal_cost;
    let distinct = eval.distinct_electricity(&problem.h0, &x);
    let scenario_costs = eval
        .scenarios()
        .members()
        .iter()
        .map(|k| distinct[*k] + shared)
        .collect();

    let solver_ok = match report.status {
        SolveStatus::Converged => true,
        SolveStatus::LineSearchFailure | SolveStatus::MaxIter => {
            report.pg_norm <= config.accept_pg_norm
        }
    };
    let status = if solver_ok && terminal_cost <= config.terminal_threshold {
        SolutionStatus::Converged
    } else {
        SolutionStatus::Fallback
    };
    Ok(ControlSolution {
        inputs: unstack(&x, m),
        states: unstack(&h[n..], n),
        objective: final_eval.value,
        stage_costs: eval.stage_costs(&problem.h0, &x),
        scenario_costs,
        status,
        solver_status: report.status,
        iterations: report.iterations,
        pg_norm: report.pg_norm,
        terminal_distance,
        terminal_penalty: terminal_cost,
        barrier_saturated: final_eval.saturated,
    })
}

/// Deterministic variant: the same problem with a single PV trajectory,
/// the point forecast.
pub fn solve_deterministic(
    model: &LinearPlantModel,
    config: &MpcConfig,
    problem: &MpcProblem,
    forecast: Vec<f64>,
    warm_start: Option<&[f64]>,
) -> Result<ControlSolution, ControlError> {
    let mode = problem.scenarios.mode;
    let start = problem.scenarios.start_slot;
    let single = MpcProblem {
        scenarios: ScenarioSet::single(forecast, start, mode),
        ..problem.clone()
    };
    solve_mpc(model, config, &single, warm_start)
}

/// Input applied when the current solve is rejected: entry `steps_since` of
/// the last accepted sequence (normally `u_1`), or the periodic reference
/// input of the current step when that sequence is too short.
pub fn fallback_input(
    previous: Option<&ControlSolution>,
    steps_since: usize,
    reference: Option<&PeriodicReference>,
    step_of_day: usize,
) -> Result<Vec<f64>, ControlError> {
    let prev = previous.ok_or(ControlError::NoHistory)?;
    if let Some(u) = prev.inputs.get(steps_since) {
        return Ok(u.clone());
    }
    reference
        .and_then(|r| r.inputs.get(step_of_day))
        .cloned()
        .ok_or(ControlError::NoHistory)
}

/// Initial point for the next solve: the previous sequence advanced by
/// `steps_since` steps, padded with the periodic reference. At the start of
/// a day (or without a usable previous sequence) the reference alone.
pub fn shifted_warm_start(
    previous: Option<&ControlSolution>,
    steps_since: usize,
    horizon: usize,
    reference: &PeriodicReference,
    step_of_day: usize,
) -> Vec<f64> {
    let day_steps = reference.inputs.len();
    let from_reference = |j: usize| reference.inputs[(step_of_day + j) % day_steps].clone();
    let tail: Vec<Vec<f64>> = match previous {
        Some(p) if p.horizon() == horizon + steps_since => p.inputs[steps_since..].to_vec(),
        _ => (0..horizon).map(from_reference).collect(),
    };
    stack(&tail)
}
