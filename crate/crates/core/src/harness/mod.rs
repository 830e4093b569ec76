//! Closed-loop experiments: synthetic data, the SO/DO runs on the nonlinear
//! truth plant and their reports.

mod closed_loop;
mod report;
mod synthetic;

pub use closed_loop::{
    prepare, rule_based_pump_energy, run_closed_loop, ExperimentSetup, RunOutput, TraceRecord,
};
pub use report::{
    compare_methods, compare_so_do, write_comparison_csv, write_run_outputs, write_trace_csv,
    ComparisonReport, ComparisonRow, DayMetrics, Metrics, ViolationRecord,
};
pub use synthetic::{
    mean_day, perturbed_demand, scale_pv_to_pump_average, two_level_tariff, DemandConfig,
    PvDataset, SyntheticPvGenerator, Weather,
};

use serde::{Deserialize, Serialize};

use crate::controller::MpcConfig;
use crate::error::HarnessError;
use crate::forecast::ForecastConfig;
use crate::plant::{ExcitationDesign, NonlinearNetwork};
use crate::time::TimeGrid;

/// Optimization method of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Scenario-averaged cost.
    #[serde(rename = "so")]
    Stochastic,
    /// Cost of the point forecast.
    #[serde(rename = "do")]
    Deterministic,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Stochastic => "so",
            Method::Deterministic => "do",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Closed-loop days per case.
    pub days: usize,
    /// PV days ingested by the forecaster before the first closed-loop day.
    pub warmup_days: usize,
    pub seed: u64,
    /// Number of cases in a comparison campaign.
    pub cases: usize,
    pub pv: SyntheticPvGenerator,
    /// Weather of the closed-loop days; unlisted days are drawn.
    pub weather: Vec<Weather>,
    /// Recorded PV days (kW on the PV grid) used instead of the generator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recorded_pv: Option<Vec<Vec<f64>>>,
    /// Fixed PV multiplier; by default PV is scaled to the average daily
    /// pump energy of a rule-based day.
    pub pv_scale: Option<f64>,
    /// Electricity price per control step of the day (per kWh).
    pub price: Vec<f64>,
    pub demand: DemandConfig,
    pub network: NonlinearNetwork,
    pub excitation: ExcitationDesign,
    pub controller: MpcConfig,
    pub forecast: ForecastConfig,
    /// Initial tank levels; the periodic reference start by default.
    pub initial_levels: Option<Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let grid = TimeGrid::default();
        Self {
            days: 1,
            warmup_days: 30,
            seed: 42,
            cases: 4,
            pv: SyntheticPvGenerator::default(),
            weather: Vec::new(),
            recorded_pv: None,
            pv_scale: None,
            price: two_level_tariff(&grid, 0.12, 0.30, 22.0, 6.0),
            demand: DemandConfig::default(),
            network: NonlinearNetwork::surrogate(),
            excitation: ExcitationDesign::default(),
            controller: MpcConfig::default(),
            forecast: ForecastConfig::default(),
            initial_levels: None,
        }
    }
}

impl ExperimentConfig {
    pub fn grid(&self) -> &TimeGrid {
        &self.controller.grid
    }

    /// Checks every parameter block and their mutual consistency.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        self.controller.validate()?;
        self.forecast.validate()?;
        self.network.validate()?;
        self.excitation.validate(&self.network)?;
        self.pv.validate().map_err(HarnessError::Config)?;
        if self.days == 0 {
            return bad("at least one closed-loop day is required".into());
        }
        if self.cases == 0 {
            return bad("at least one case is required".into());
        }
        let grid = self.grid();
        let steps = grid.steps_per_day();
        let slots = grid.slots_per_day();
        if self.network.n_states() != self.controller.n_states()
            || self.network.n_pumps() != self.controller.n_inputs()
        {
            return bad("controller bounds do not match the network".into());
        }
        if self.price.len() != steps || self.price.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return bad(format!("price profile needs {steps} non-negative values"));
        }
        if self.demand.base.len() != steps
            || self
                .demand
                .base
                .iter()
                .any(|d| !(*d >= 0.0) || !d.is_finite())
        {
            return bad(format!("base demand needs {steps} non-negative values"));
        }
        if self.demand.sample_days == 0
            || !(self.demand.deviation_sigma >= 0.0)
            || !(self.demand.deviation_phi.abs() < 1.0)
        {
            return bad("demand perturbation needs ≥ 1 sample day, σ ≥ 0 and |φ| < 1".into());
        }
        if let Some(days) = &self.recorded_pv {
            if days.len() < self.warmup_days + self.days {
                return bad(format!(
                    "recorded PV has {} days, need {} warm-up plus {} closed-loop days",
                    days.len(),
                    self.warmup_days,
                    self.days
                ));
            }
            if days
                .iter()
                .any(|d| d.len() != slots || d.iter().any(|v| !(*v >= 0.0) || !v.is_finite()))
            {
                return bad(format!(
                    "every recorded PV day needs {slots} non-negative samples"
                ));
            }
        }
        if let Some(s) = self.pv_scale {
            if !(s >= 0.0) || !s.is_finite() {
                return bad(format!("PV scale {s} must be non-negative"));
            }
        }
        if let Some(h) = &self.initial_levels {
            let heights = self.network.tanks.iter().map(|t| t.height);
            if h.len() != self.network.n_states()
                || h.iter()
                    .zip(heights)
                    .any(|(v, top)| !(0.0..=top).contains(v))
            {
                return bad("initial levels must lie within the tanks".into());
            }
        }
        Ok(())
    }
}
