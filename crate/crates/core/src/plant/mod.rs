//! Water network plant: a nonlinear tank surrogate used as ground truth and
//! the identified linear model used by the controller.
//!
//! Flows are in L/s, levels and pressures in metres of head, power in kW.

mod identify;
mod linear;
mod network;

pub use identify::{
    generate_experiment, identify_from_samples, identify_linear_model, ExcitationDesign,
    ExperimentSample, IdentificationReport,
};
pub use linear::{discretize, matrix_log, LinearPlantModel};
pub use network::{
    pump_outlet_pressure, pump_power, simulate_step, NonlinearNetwork, Pipe, PlantState, Pump,
    StepOutcome, Tank, TankViolation, ViolationKind,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

/// One row of a plant experiment trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantTraceRow {
    pub t: f64,
    pub h1: f64,
    pub h2_state: f64,
    pub u1: f64,
    pub u2: f64,
    pub d_a: f64,
    pub pout1: f64,
    pub pout2: f64,
}

/// CSV with header `t,h1,h2_state,u1,u2,d_a,pout1,pout2`.
pub fn write_plant_trace<W: Write>(rows: &[PlantTraceRow], out: W) -> Result<(), crate::IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "h1", "h2_state", "u1", "u2", "d_a", "pout1", "pout2"])?;
    for r in rows {
        w.serialize((r.t, r.h1, r.h2_state, r.u1, r.u2, r.d_a, r.pout1, r.pout2))?;
    }
    w.flush().map_err(crate::IoError::from)?;
    Ok(())
}
