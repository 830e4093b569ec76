use serde::{Deserialize, Serialize};

use crate::error::PlantError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tank {
    pub name: String,
    /// Cross-sectional area (m²).
    pub area: f64,
    /// Physical height (m); levels are clipped to `[0, height]`.
    pub height: f64,
    /// Elevation of the tank floor (m).
    pub elevation: f64,
}

/// Pipe between two tanks with flow `c·sign(Δψ)·|Δψ|^γ` from `from` to `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipe {
    pub from: usize,
    pub to: usize,
    pub conductance: f64,
    pub exponent: f64,
}

/// Pump station filling one tank, with outlet pressure
/// `e + a·h + b·u + c·u²` where `h` is the level of the fed tank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pump {
    pub tank: usize,
    pub static_head: f64,
    pub level_gain: f64,
    pub linear: f64,
    pub quadratic: f64,
    pub inlet_pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearNetwork {
    pub tanks: Vec<Tank>,
    pub pipes: Vec<Pipe>,
    pub pumps: Vec<Pump>,
    /// Share of the aggregate demand drawn from each tank.
    pub demand_split: Vec<f64>,
    /// Volume per flow unit and second (m³ per L).
    pub flow_unit: f64,
    /// kW per (flow unit × metre of head).
    pub power_factor: f64,
}

impl NonlinearNetwork {
    /// Two-state surrogate: a large tank standing for the two coupled tanks
    /// of the first zone and a smaller, lower tank for the second, joined by
    /// one gravity pipe, each fed by its own pump.
    pub fn surrogate() -> Self {
        Self {
            tanks: vec![
                Tank {
                    name: "T1+T2".into(),
                    area: 900.0,
                    height: 3.3,
                    elevation: 5.0,
                },
                Tank {
                    name: "T3".into(),
                    area: 600.0,
                    height: 3.1,
                    elevation: 0.0,
                },
            ],
            pipes: vec![Pipe {
                from: 0,
                to: 1,
                conductance: 5.0,
                exponent: 0.54,
            }],
            pumps: vec![
                Pump {
                    tank: 0,
                    static_head: 35.0,
                    level_gain: 1.0,
                    linear: 0.02,
                    quadratic: 1e-4,
                    inlet_pressure: 2.0,
                },
                Pump {
                    tank: 1,
                    static_head: 33.0,
                    level_gain: 1.0,
                    linear: 0.025,
                    quadratic: 1.2e-4,
                    inlet_pressure: 2.0,
                },
            ],
            demand_split: vec![0.6, 0.4],
            flow_unit: 1e-3,
            power_factor: 9.81e-3 / 0.75,
        }
    }

    pub fn n_states(&self) -> usize {
        self.tanks.len()
    }

    pub fn n_pumps(&self) -> usize {
        self.pumps.len()
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let bad = |msg: String| Err(PlantError::InvalidNetwork(msg));
        let n = self.tanks.len();
        if n == 0 || self.pumps.is_empty() {
            return bad("network needs at least one tank and one pump".into());
        }
        for t in &self.tanks {
            if !(t.area > 0.0 && t.height > 0.0 && t.elevation.is_finite()) {
                return bad(format!("tank {} needs positive area and height", t.name));
            }
        }
        for (k, p) in self.pipes.iter().enumerate() {
            if p.from >= n || p.to >= n || p.from == p.to {
                return bad(format!(
                    "pipe {k} connects invalid tanks {} -> {}",
                    p.from, p.to
                ));
            }
            if !(p.conductance > 0.0 && p.exponent > 0.0) {
                return bad(format!("pipe {k} needs positive conductance and exponent"));
            }
        }
        for (k, p) in self.pumps.iter().enumerate() {
            if p.tank >= n {
                return bad(format!("pump {k} feeds unknown tank {}", p.tank));
            }
            let coeffs = [
                p.static_head,
                p.level_gain,
                p.linear,
                p.quadratic,
                p.inlet_pressure,
            ];
            if coeffs.iter().any(|c| !c.is_finite()) {
                return bad(format!("pump {k} has non-finite coefficients"));
            }
        }
        if self.demand_split.len() != n || self.demand_split.iter().any(|s| !(*s >= 0.0)) {
            return bad("demand split needs one non-negative share per tank".into());
        }
        if (self.demand_split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("demand split must sum to 1".into());
        }
        if !(self.flow_unit > 0.0 && self.power_factor > 0.0) {
            return bad("flow unit and power factor must be positive".into());
        }
        Ok(())
    }

    /// Flow through each pipe, positive from `from` to `to`.
    pub fn pipe_flows(&self, h: &[f64]) -> Vec<f64> {
        self.pipes
            .iter()
            .map(|p| {
                let dpsi = (self.tanks[p.from].elevation + h[p.from])
                    - (self.tanks[p.to].elevation + h[p.to]);
                p.conductance * dpsi.signum() * dpsi.abs().powf(p.exponent)
            })
            .collect()
    }

    /// Net inflow to each tank (flow units).
    pub fn net_inflows(&self, h: &[f64], u: &[f64], d_a: f64) -> Vec<f64> {
        let mut q: Vec<f64> = self.demand_split.iter().map(|s| -s * d_a).collect();
        for (pump, flow) in self.pumps.iter().zip(u) {
            q[pump.tank] += flow;
        }
        for (pipe, flow) in self.pipes.iter().zip(self.pipe_flows(h)) {
            q[pipe.from] -= flow;
            q[pipe.to] += flow;
        }
        q
    }

    /// Level rates `ḣ_j = q_j·flow_unit/A_j` (m/s).
    pub fn level_rates(&self, h: &[f64], u: &[f64], d_a: f64) -> Vec<f64> {
        self.net_inflows(h, u, d_a)
            .into_iter()
            .zip(&self.tanks)
            .map(|(q, t)| q * self.flow_unit / t.area)
            .collect()
    }

    /// Pump power (kW).
    pub fn pump_power_kw(&self, state: &PlantState, u: &[f64]) -> f64 {
        let p_out = pump_outlet_pressure(self, state, u);
        let p_in: Vec<f64> = self.pumps.iter().map(|p| p.inlet_pressure).collect();
        self.power_factor * pump_power(u, &p_out, &p_in)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Tank levels (m).
    pub h: Vec<f64>,
}

impl PlantState {
    pub fn new(h: Vec<f64>) -> Self {
        Self { h }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    TankEmpty,
    TankOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TankViolation {
    pub tank: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub state: PlantState,
    /// Tanks that had to be clipped during the step (at most one entry per
    /// tank and kind).
    pub violations: Vec<TankViolation>,
}

const MAX_SUBSTEP: f64 = 60.0;

/// Integrates the tank balances over `dt` seconds with RK4 substeps of at
/// most 60 s, clipping levels to the physical range after each substep.
pub fn simulate_step(
    net: &NonlinearNetwork,
    state: &PlantState,
    u: &[f64],
    d_a: f64,
    dt: f64,
) -> Result<StepOutcome, PlantError> {
    let n = net.n_states();
    if state.h.len() != n || u.len() != net.n_pumps() {
        return Err(PlantError::Dimension(format!(
            "expected {n} levels and {} flows, got {} and {}",
            net.n_pumps(),
            state.h.len(),
            u.len()
        )));
    }
    if u.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || !(d_a >= 0.0) || !d_a.is_finite() {
        return Err(PlantError::InvalidInput(
            "flows and demand must be finite and non-negative".into(),
        ));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(PlantError::InvalidInput(format!(
            "step length {dt} must be positive"
        )));
    }
    let substeps = (dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let hs = dt / substeps as f64;
    let mut h = state.h.clone();
    let mut violations: Vec<TankViolation> = Vec::new();
    let shifted = |h: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        h.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    for _ in 0..substeps {
        let k1 = net.level_rates(&h, u, d_a);
        let k2 = net.level_rates(&shifted(&h, &k1, hs / 2.0), u, d_a);
        let k3 = net.level_rates(&shifted(&h, &k2, hs / 2.0), u, d_a);
        let k4 = net.level_rates(&shifted(&h, &k3, hs), u, d_a);
        for j in 0..n {
            h[j] += hs / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            let kind = if h[j] < 0.0 {
                h[j] = 0.0;
                Some(ViolationKind::TankEmpty)
            } else if h[j] > net.tanks[j].height {
                h[j] = net.tanks[j].height;
                Some(ViolationKind::TankOverflow)
            } else {
                None
            };
            if let Some(kind) = kind {
                let v = TankViolation { tank: j, kind };
                if !violations.contains(&v) {
                    violations.push(v);
                }
            }
        }
    }
    Ok(StepOutcome {
        state: PlantState { h },
        violations,
    })
}

/// Ground-truth outlet pressure of every pump.
pub fn pump_outlet_pressure(net: &NonlinearNetwork, state: &PlantState, u: &[f64]) -> Vec<f64> {
    net.pumps
        .iter()
        .zip(u)
        .map(|(p, &q)| {
            p.static_head + p.level_gain * state.h[p.tank] + p.linear * q + p.quadratic * q * q
        })
        .collect()
}

/// Hydraulic power `uᵀ(p_out − p_in)` in flow × head units.
pub fn pump_power(u: &[f64], p_out: &[f64], p_in: &[f64]) -> f64 {
    u.iter()
        .zip(p_out)
        .zip(p_in)
        .map(|((q, po), pi)| q * (po - pi))
        .sum()
}
