use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::{summarize, Metrics};
use super::synthetic::{mean_day, perturbed_demand, scale_pv_to_pump_average, Weather};
use super::{ExperimentConfig, Method};
use crate::controller::{
    fallback_input, shifted_warm_start, solve_deterministic, solve_mpc, solve_periodic,
    ControlSolution, MpcProblem, PeriodicReference,
};
use crate::error::{ControlError, HarnessError};
use crate::forecast::{point_forecast, DailyProfile, Forecaster};
use crate::plant::{
    identify_linear_model, pump_outlet_pressure, simulate_step, IdentificationReport,
    NonlinearNetwork, PlantState, TankViolation,
};
use crate::scenario::{
    posterior_after_observations, sample_day, sample_night, SamplingMode, ScenarioSet,
};

/// Everything shared by the runs of one case: identified model, periodic
/// reference, scaled PV and demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub config: ExperimentConfig,
    pub case: usize,
    pub identification: IdentificationReport,
    pub reference: PeriodicReference,
    /// Scaled PV days ingested before the closed loop.
    pub history: Vec<Vec<f64>>,
    /// Scaled PV of the closed-loop days.
    pub pv_days: Vec<Vec<f64>>,
    pub weather: Vec<Option<Weather>>,
    /// Demand per control step of each closed-loop day (known in advance).
    pub demand: Vec<Vec<f64>>,
    pub pv_scale: f64,
    pub baseline_pump_energy: f64,
    pub initial_levels: Vec<f64>,
}

/// One PV sample interval of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub d_a: f64,
    pub p_out: Vec<f64>,
    pub pump_kw: f64,
    pub pv_kw: f64,
    pub grid_kw: f64,
    pub price: f64,
    pub fallback: bool,
    pub violations: Vec<TankViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub metrics: Metrics,
    pub trace: Vec<TraceRecord>,
}

/// Daily pump energy (kWh) of a proportional level-holding rule on the
/// truth plant: each pump covers its tank's demand share and corrects the
/// level towards the middle of the band within an hour.
pub fn rule_based_pump_energy(config: &ExperimentConfig) -> Result<f64, HarnessError> {
    let net = &config.network;
    let grid = config.grid();
    let c = &config.controller;
    let mid: Vec<f64> = c
        .h_min
        .iter()
        .zip(&c.h_max)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let mut state = PlantState::new(mid.clone());
    let sps = grid.slots_per_step();
    let mut energy = 0.0;
    for &d in &config.demand.base {
        for _ in 0..sps {
            let u: Vec<f64> = net
                .pumps
                .iter()
                .zip(&c.u_max)
                .map(|(p, &cap)| {
                    let k = p.tank;
                    let share = net.demand_split[k] * d;
                    let correction =
                        (mid[k] - state.h[k]) * net.tanks[k].area / (net.flow_unit * 3600.0);
                    (share + correction).clamp(0.0, cap)
                })
                .collect();
            energy += net.pump_power_kw(&state, &u) * grid.pv_hours();
            state = simulate_step(net, &state, &u, d, grid.pv_seconds)?.state;
        }
    }
    Ok(energy)
}

fn case_seed(seed: u64, case: usize) -> u64 {
    seed.wrapping_add((case as u64).wrapping_mul(0x9E37_79B9))
}

/// Identifies the controller model and builds the data of case `case`.
pub fn prepare(config: &ExperimentConfig, case: usize) -> Result<ExperimentSetup, HarnessError> {
    config.validate()?;
    let grid = *config.grid();
    let seed = case_seed(config.seed, case);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let identification =
        identify_linear_model(&config.network, &config.excitation, grid.step_seconds)?;

    let total = config.warmup_days + config.days;
    let (raw, weather) = match &config.recorded_pv {
        Some(days) => {
            let start = rng.random_range(0..=days.len() - total);
            (days[start..start + total].to_vec(), vec![None; total])
        }
        None => {
            let data = config
                .pv
                .generate(&grid, total, rng.random(), &config.weather);
            (data.days, data.weather)
        }
    };
    let baseline_pump_energy = rule_based_pump_energy(config)?;
    let (scaled, pv_scale) = match config.pv_scale {
        Some(s) => (
            raw.iter()
                .map(|d| d.iter().map(|v| v * s).collect())
                .collect(),
            s,
        ),
        None => scale_pv_to_pump_average(&raw, baseline_pump_energy, grid.pv_hours()),
    };
    let (history, pv_days) = scaled.split_at(config.warmup_days);

    let samples = config.demand.sample_days(rng.random());
    let mean = mean_day(&samples);
    let offset = rng.random_range(0..samples.len());
    let demand = (0..config.days)
        .map(|d| {
            perturbed_demand(
                &config.demand.base,
                &samples[(offset + d) % samples.len()],
                &mean,
            )
        })
        .collect();

    let avg_pv = if history.is_empty() {
        None
    } else {
        Some(mean_day(history))
    };
    let reference = solve_periodic(
        &identification.model,
        &config.controller,
        &config.demand.base,
        &config.price,
        avg_pv.as_deref(),
    )?;
    let initial_levels = config
        .initial_levels
        .clone()
        .unwrap_or_else(|| reference.states[0].clone());
    Ok(ExperimentSetup {
        config: config.clone(),
        case,
        identification,
        reference,
        history: history.to_vec(),
        pv_days: pv_days.to_vec(),
        weather: weather[config.warmup_days..].to_vec(),
        demand,
        pv_scale,
        baseline_pump_energy,
        initial_levels,
    })
}

fn step_seed(seed: u64, case: usize, step: usize) -> u64 {
    case_seed(seed, case).wrapping_add((step as u64) << 32)
}

/// Scenario set for the current step: night sampling before sunrise is
/// detected, conditional day sampling afterwards.
fn build_scenarios(
    forecaster: &Forecaster,
    observed: &[f64],
    count: usize,
    seed: u64,
    exec: crate::Exec,
) -> ScenarioSet {
    let shape = forecaster.shape();
    let errors = forecaster.error_model();
    let prior = forecaster.prior();
    let start = observed.len();
    match forecaster.intraday(observed).sunrise {
        None => sample_night(prior, &shape, &errors, count, seed, start, exec),
        Some(rise) => {
            let posterior = posterior_after_observations(prior, &shape, &errors, observed, rise);
            sample_day(
                posterior, &shape, &errors, observed, rise, count, seed, start, exec,
            )
        }
    }
}

fn point_scenario(forecaster: &Forecaster, observed: &[f64]) -> ScenarioSet {
    let estimate = forecaster.intraday(observed);
    let mode = if estimate.sunrise.is_some() {
        SamplingMode::Day
    } else {
        SamplingMode::Night
    };
    let start = observed.len();
    let forecast = point_forecast(&forecaster.shape(), &estimate.fused);
    ScenarioSet::single(forecast[start..].to_vec(), start, mode)
}

/// Runs the closed loop of one case with the given method.
///
/// Every control step the forecaster is updated, the problem is solved on
/// the identified model and the first input is applied to the nonlinear
/// plant for one step, integrated and accounted per PV sample.
pub fn run_closed_loop(setup: &ExperimentSetup, method: Method) -> Result<RunOutput, HarnessError> {
    let config = &setup.config;
    let grid = *config.grid();
    let ctrl = &config.controller;
    let net: &NonlinearNetwork = &config.network;
    let model = &setup.identification.model;
    let reference = &setup.reference;
    let steps = grid.steps_per_day();
    let sps = grid.slots_per_step();
    let slots = grid.slots_per_day();

    let mut forecaster = Forecaster::new(config.forecast, slots)?;
    for (d, day) in setup.history.iter().enumerate() {
        forecaster.ingest_day(&DailyProfile::new(d, day.clone(), slots)?)?;
    }

    let mut state = PlantState::new(setup.initial_levels.clone());
    let mut trace = Vec::with_capacity(config.days * slots);
    let mut accepted: Option<(ControlSolution, usize)> = None;
    let mut previous: Option<ControlSolution> = None;
    let mut solves = 0usize;
    for day in 0..config.days {
        if day > 0 {
            let index = setup.history.len() + day - 1;
            forecaster.ingest_day(&DailyProfile::new(
                index,
                setup.pv_days[day - 1].clone(),
                slots,
            )?)?;
        }
        let pv = &setup.pv_days[day];
        let demand = &setup.demand[day];
        for j in 0..steps {
            let k = day * steps + j;
            let t = k as f64 * grid.step_seconds;
            let observed = &pv[..j * sps];
            let problem = MpcProblem {
                t,
                h0: state.h.clone(),
                demand: demand[j..].to_vec(),
                price: config.price[j..].to_vec(),
                scenarios: match method {
                    Method::Stochastic => build_scenarios(
                        &forecaster,
                        observed,
                        ctrl.scenarios,
                        step_seed(config.seed, setup.case, k),
                        ctrl.exec,
                    ),
                    Method::Deterministic => point_scenario(&forecaster, observed),
                },
                terminal_target: reference.anchor.clone(),
            };
            let warm = shifted_warm_start(previous.as_ref(), 1, steps - j, reference, j);
            let solution = match method {
                Method::Stochastic => solve_mpc(model, ctrl, &problem, Some(&warm))?,
                Method::Deterministic => {
                    let forecast = problem.scenarios.scenarios[0].pv_power.clone();
                    solve_deterministic(model, ctrl, &problem, forecast, Some(&warm))?
                }
            };
            solves += 1;
            let fallback = !solution.is_converged();
            let u = if fallback {
                let last = accepted.as_ref().map(|(s, _)| s);
                let since = accepted.as_ref().map_or(0, |(_, at)| k - at);
                match fallback_input(last, since, Some(reference), j) {
                    Ok(u) => u,
                    Err(ControlError::NoHistory) => return Err(HarnessError::Aborted),
                    Err(e) => return Err(e.into()),
                }
            } else {
                solution.inputs[0].clone()
            };
            let u: Vec<f64> = u
                .iter()
                .zip(&ctrl.u_max)
                .map(|(v, cap)| v.clamp(0.0, *cap))
                .collect();
            if !fallback {
                accepted = Some((solution.clone(), k));
            }
            previous = Some(solution);

            let d_a = demand[j];
            let price = config.price[j];
            for s in 0..sps {
                let slot = j * sps + s;
                let pump_kw = net.pump_power_kw(&state, &u);
                let pv_kw = pv[slot];
                let p_out = pump_outlet_pressure(net, &state, &u);
                let outcome = simulate_step(net, &state, &u, d_a, grid.pv_seconds)?;
                trace.push(TraceRecord {
                    t: t + s as f64 * grid.pv_seconds,
                    h: state.h.clone(),
                    u: u.clone(),
                    d_a,
                    p_out,
                    pump_kw,
                    pv_kw,
                    grid_kw: (pump_kw - pv_kw).max(0.0),
                    price,
                    fallback,
                    violations: outcome.violations.clone(),
                });
                state = outcome.state;
            }
        }
    }
    let metrics = summarize(setup, method, &trace, solves);
    Ok(RunOutput { metrics, trace })
}
