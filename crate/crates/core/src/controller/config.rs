use serde::{Deserialize, Serialize};

use crate::error::ControlError;
use crate::optimizer::SolverOptions;
use crate::time::TimeGrid;
use crate::Exec;

/// Controller parameters. Lengths follow the plant: `n` levels, `m` pumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub grid: TimeGrid,
    /// Upper flow limit of each pump (L/s); the lower limit is 0.
    pub u_max: Vec<f64>,
    /// Soft lower level bound `h̃` per tank (m).
    pub h_min: Vec<f64>,
    /// Soft upper level bound `h̄` per tank (m).
    pub h_max: Vec<f64>,
    /// Barrier gains, lower-bound constraints first, then upper (length 2n).
    pub barrier_a: Vec<f64>,
    /// Barrier offsets (m), same layout as `barrier_a`.
    pub barrier_b: Vec<f64>,
    /// Softplus sharpness per watt of grid power.
    pub softplus_beta: f64,
    pub terminal_radius: f64,
    pub terminal_weight: f64,
    /// A solution whose terminal penalty exceeds this is not applied.
    pub terminal_threshold: f64,
    pub periodic_weight: f64,
    /// Largest accepted `‖h_0 − h_end‖` of the periodic reference (m).
    pub periodic_tolerance: f64,
    pub scenarios: usize,
    pub solver: SolverOptions,
    /// A line-search stall or iteration limit is accepted as converged
    /// below this projected gradient norm.
    pub accept_pg_norm: f64,
    pub exec: Exec,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            grid: TimeGrid::default(),
            u_max: vec![100.0, 100.0],
            h_min: vec![1.0, 1.0],
            h_max: vec![3.0, 2.8],
            barrier_a: vec![80.0; 4],
            barrier_b: vec![0.3; 4],
            softplus_beta: 0.02,
            terminal_radius: 0.1,
            terminal_weight: 1e4,
            terminal_threshold: 1.0,
            periodic_weight: 1e4,
            periodic_tolerance: 1e-3,
            scenarios: 50,
            solver: SolverOptions::default(),
            accept_pg_norm: 1e-3,
            exec: Exec::default(),
        }
    }
}

impl MpcConfig {
    pub fn n_states(&self) -> usize {
        self.h_min.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.u_max.len()
    }

    /// Softplus sharpness per kW.
    pub fn beta_per_kw(&self) -> f64 {
        self.softplus_beta * 1000.0
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |msg: String| Err(ControlError::InvalidConfig(msg));
        self.grid
            .validate()
            .map_err(|e| ControlError::InvalidConfig(e.to_string()))?;
        let n = self.h_min.len();
        if n == 0 || self.h_max.len() != n {
            return bad("level bounds must be non-empty and of equal length".into());
        }
        if self.u_max.is_empty() || self.u_max.iter().any(|u| !(*u > 0.0) || !u.is_finite()) {
            return bad("every pump needs a positive finite flow limit".into());
        }
        if self
            .h_min
            .iter()
            .zip(&self.h_max)
            .any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
        {
            return bad("lower level bounds must be below upper bounds".into());
        }
        if self.barrier_a.len() != 2 * n || self.barrier_b.len() != 2 * n {
            return bad(format!("barrier parameters need {} entries", 2 * n));
        }
        if self
            .barrier_a
            .iter()
            .chain(&self.barrier_b)
            .any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return bad("barrier parameters must be positive".into());
        }
        let positive = [
            ("softplus_beta", self.softplus_beta),
            ("terminal_weight", self.terminal_weight),
            ("terminal_threshold", self.terminal_threshold),
            ("periodic_weight", self.periodic_weight),
            ("periodic_tolerance", self.periodic_tolerance),
            ("accept_pg_norm", self.accept_pg_norm),
            ("solver.tol", self.solver.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.terminal_radius >= 0.0) {
            return bad("terminal radius must be non-negative".into());
        }
        if self.scenarios == 0 {
            return bad("at least one scenario is required".into());
        }
        if self.solver.max_iter == 0
            || !(self.solver.backtrack > 0.0 && self.solver.backtrack < 1.0)
        {
            return bad("solver needs max_iter ≥ 1 and a backtracking factor in (0, 1)".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = MpcConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<MpcConfig>(&text).unwrap(), cfg);
        let partial: MpcConfig = serde_json::from_str(r#"{"scenarios": 8}"#).unwrap();
        assert_eq!(partial.scenarios, 8);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = MpcConfig::default();
        cfg.h_min[1] = 3.0;
        assert!(cfg.validate().is_err());
        let cfg = MpcConfig {
            barrier_a: vec![80.0; 3],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = MpcConfig::default();
        cfg.grid.pv_seconds = 700.0;
        assert!(cfg.validate().is_err());
        let cfg = MpcConfig {
            softplus_beta: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
