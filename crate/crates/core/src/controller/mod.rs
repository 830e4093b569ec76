//! Shrinking-horizon scenario MPC for the pump schedule.
//!
//! The decision vector is the stacked input sequence; levels follow from the
//! discrete linear model. Level bounds are soft (exponential barriers), the
//! terminal ball around the periodic reference is a quadratic penalty, and
//! grid power is smoothed with a softplus.

mod config;
mod cost;
mod mpc;
mod periodic;

pub use crate::time::horizon_length;
pub use config::MpcConfig;
pub use cost::{
    barrier_cost, softplus, softplus_slope, stage_cost, terminal_penalty, WeightedScenarios,
    EXPONENT_CLAMP,
};
pub use mpc::{
    expected_cost, expected_cost_gradient, fallback_input, shifted_warm_start, solve_deterministic,
    solve_mpc, ControlSolution, MpcProblem, SolutionStatus,
};
pub use periodic::{solve_periodic, PeriodicReference};
