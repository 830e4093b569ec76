//! Stochastic economic model-predictive pump scheduling for a water
//! distribution network supplied by grid-connected photovoltaics.
//!
//! The crate is organised bottom-up:
//!
//! - [`forecast`]: day-ahead and intra-day probabilistic PV prediction
//!   (normalized shape tracking, ARMA(1,1) multiplier model, sunrise
//!   detection, Gaussian fusion, daytime error model).
//! - [`scenario`]: sampling of equally weighted PV trajectories over the
//!   remaining day, at night from the prior and during the day from the
//!   multiplier posterior conditioned on observed production.
//! - [`plant`]: nonlinear two-tank surrogate network, identification of the
//!   reduced linear tank model and zero-order-hold discretization.
//! - [`optimizer`]: projected limited-memory quasi-Newton solver for
//!   smooth box-constrained problems.
//! - [`controller`]: shrinking-horizon scenario MPC, periodic reference and
//!   the deterministic counterpart.
//! - [`harness`]: closed-loop experiments and stochastic/deterministic
//!   comparisons.
//!
//! Data-parallel inner loops (scenario sampling, per-scenario cost terms,
//! independent experiment runs) go through [`Exec`]. With the `parallel`
//! feature enabled they run on rayon; results are bit-identical to the
//! sequential path either way.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod controller;
pub mod error;
mod exec;
pub mod forecast;
pub mod harness;
pub mod io;
pub mod optimizer;
pub mod plant;
pub mod scenario;
pub mod time;

pub use error::{ControlError, ForecastError, HarnessError, IoError, OptimError, PlantError};
pub use exec::Exec;
