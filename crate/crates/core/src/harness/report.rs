use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::closed_loop::{prepare, run_closed_loop, ExperimentSetup, RunOutput, TraceRecord};
use super::synthetic::Weather;
use super::{ExperimentConfig, Method};
use crate::error::{HarnessError, IoError};
use crate::plant::ViolationKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub t: f64,
    pub tank: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub day: usize,
    pub weather: Option<Weather>,
    pub cost: f64,
    pub grid_energy_kwh: f64,
    pub pump_energy_kwh: f64,
    pub pv_used_kwh: f64,
    pub pv_energy_kwh: f64,
    pub pv_share: f64,
    /// Pump energy drawn while the tariff is at its minimum.
    pub cheap_window_pump_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub method: Method,
    pub case: usize,
    pub days: usize,
    pub total_cost: f64,
    pub grid_energy_kwh: f64,
    pub pump_energy_kwh: f64,
    pub pv_used_kwh: f64,
    pub pv_energy_kwh: f64,
    /// `pv_used / pump_energy`.
    pub pv_share: f64,
    pub cheap_window_pump_kwh: f64,
    pub solves: usize,
    pub fallback_steps: usize,
    pub min_level: Vec<f64>,
    pub max_level: Vec<f64>,
    /// Clipping events of the truth plant.
    pub violations: Vec<ViolationRecord>,
    pub pv_scale: f64,
    pub per_day: Vec<DayMetrics>,
}

fn share(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        (part / whole).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

#[derive(Default)]
struct Totals {
    cost: f64,
    grid: f64,
    pump: f64,
    pv_used: f64,
    pv: f64,
    cheap: f64,
}

impl Totals {
    fn add(&mut self, r: &TraceRecord, hours: f64, cheap_price: f64) {
        let pump = r.pump_kw * hours;
        let grid = r.grid_kw * hours;
        self.cost += r.price * grid;
        self.grid += grid;
        self.pump += pump;
        self.pv_used += r.pump_kw.min(r.pv_kw) * hours;
        self.pv += r.pv_kw * hours;
        if r.price <= cheap_price {
            self.cheap += pump;
        }
    }
}

pub(crate) fn summarize(
    setup: &ExperimentSetup,
    method: Method,
    trace: &[TraceRecord],
    solves: usize,
) -> Metrics {
    let config = &setup.config;
    let grid = config.grid();
    let hours = grid.pv_hours();
    let slots = grid.slots_per_day();
    let cheap_price = config.price.iter().copied().fold(f64::INFINITY, f64::min);
    let n = setup.initial_levels.len();
    let mut total = Totals::default();
    let mut per_day = Vec::with_capacity(config.days);
    let mut min_level = vec![f64::INFINITY; n];
    let mut max_level = vec![f64::NEG_INFINITY; n];
    let mut violations = Vec::new();
    for (day, records) in trace.chunks(slots).enumerate() {
        let mut t = Totals::default();
        for r in records {
            t.add(r, hours, cheap_price);
            total.add(r, hours, cheap_price);
            for (k, h) in r.h.iter().enumerate() {
                min_level[k] = min_level[k].min(*h);
                max_level[k] = max_level[k].max(*h);
            }
            violations.extend(r.violations.iter().map(|v| ViolationRecord {
                t: r.t,
                tank: v.tank,
                kind: v.kind,
            }));
        }
        per_day.push(DayMetrics {
            day,
            weather: setup.weather.get(day).copied().flatten(),
            cost: t.cost,
            grid_energy_kwh: t.grid,
            pump_energy_kwh: t.pump,
            pv_used_kwh: t.pv_used,
            pv_energy_kwh: t.pv,
            pv_share: share(t.pv_used, t.pump),
            cheap_window_pump_kwh: t.cheap,
        });
    }
    let fallback_steps = trace.iter().filter(|r| r.fallback).count() / grid.slots_per_step();
    Metrics {
        method,
        case: setup.case,
        days: config.days,
        total_cost: total.cost,
        grid_energy_kwh: total.grid,
        pump_energy_kwh: total.pump,
        pv_used_kwh: total.pv_used,
        pv_energy_kwh: total.pv,
        pv_share: share(total.pv_used, total.pump),
        cheap_window_pump_kwh: total.cheap,
        solves,
        fallback_steps,
        min_level,
        max_level,
        violations,
        pv_scale: setup.pv_scale,
        per_day,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub case: String,
    pub cost_ratio: f64,
    pub grid_energy_ratio: f64,
}

/// Ratios of a method to a baseline method, per case and in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub method: Method,
    pub baseline: Method,
    /// `Case 1..Case K` followed by `Total`.
    pub rows: Vec<ComparisonRow>,
    /// Metrics of `(method, baseline)` per case.
    pub runs: Vec<(Metrics, Metrics)>,
}

impl ComparisonReport {
    pub fn total(&self) -> &ComparisonRow {
        self.rows.last().expect("report always has a total row")
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b != 0.0 {
        a / b
    } else if a == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Runs every case with both methods on identical data and reports
/// `method / baseline` ratios of cost and grid energy.
pub fn compare_methods(
    config: &ExperimentConfig,
    method: Method,
    baseline: Method,
) -> Result<ComparisonReport, HarnessError> {
    config.validate()?;
    let exec = config.controller.exec;
    let results = exec.map_indexed(
        config.cases,
        |case| -> Result<(Metrics, Metrics), HarnessError> {
            let setup = prepare(config, case)?;
            let (a, b) = exec.join(
                || run_closed_loop(&setup, method),
                || run_closed_loop(&setup, baseline),
            );
            Ok((a?.metrics, b?.metrics))
        },
    );
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut rows: Vec<ComparisonRow> = runs
        .iter()
        .enumerate()
        .map(|(k, (a, b))| ComparisonRow {
            case: format!("Case {}", k + 1),
            cost_ratio: ratio(a.total_cost, b.total_cost),
            grid_energy_ratio: ratio(a.grid_energy_kwh, b.grid_energy_kwh),
        })
        .collect();
    let sum = |f: fn(&Metrics) -> f64, first: bool| -> f64 {
        runs.iter()
            .map(|(a, b)| if first { f(a) } else { f(b) })
            .sum()
    };
    rows.push(ComparisonRow {
        case: "Total".into(),
        cost_ratio: ratio(sum(|m| m.total_cost, true), sum(|m| m.total_cost, false)),
        grid_energy_ratio: ratio(
            sum(|m| m.grid_energy_kwh, true),
            sum(|m| m.grid_energy_kwh, false),
        ),
    });
    Ok(ComparisonReport {
        method,
        baseline,
        rows,
        runs,
    })
}

/// Stochastic against deterministic optimization.
pub fn compare_so_do(config: &ExperimentConfig) -> Result<ComparisonReport, HarnessError> {
    compare_methods(config, Method::Stochastic, Method::Deterministic)
}

/// CSV with header `case,cost_ratio,grid_energy_ratio`.
pub fn write_comparison_csv<W: Write>(report: &ComparisonReport, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with one row per PV sample interval:
/// `t,h1,h2_state,u1,u2,d_a,pout1,pout2,pump_kw,pv_kw,grid_kw,price,solver_status`
/// (one level, flow and pressure column per tank and pump).
pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let n = trace.first().map_or(2, |r| r.h.len());
    let m = trace.first().map_or(2, |r| r.u.len());
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=n).map(|i| {
        if i == 1 {
            "h1".to_string()
        } else {
            format!("h{i}_state")
        }
    }));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.push("d_a".into());
    header.extend((1..=m).map(|i| format!("pout{i}")));
    header.extend(["pump_kw", "pv_kw", "grid_kw", "price", "solver_status"].map(String::from));
    w.write_record(&header)?;
    for r in trace {
        let mut row = vec![r.t.to_string()];
        row.extend(r.h.iter().map(f64::to_string));
        row.extend(r.u.iter().map(f64::to_string));
        row.push(r.d_a.to_string());
        row.extend(r.p_out.iter().map(f64::to_string));
        row.extend([r.pump_kw, r.pv_kw, r.grid_kw, r.price].map(|v| v.to_string()));
        row.push(if r.fallback { "fallback" } else { "converged" }.into());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `metrics.json` and `trace.csv` into `dir`.
pub fn write_run_outputs(dir: &Path, run: &RunOutput) -> Result<(), IoError> {
    std::fs::create_dir_all(dir)?;
    let mut metrics = create(&dir.join("metrics.json"))?;
    serde_json::to_writer_pretty(&mut metrics, &run.metrics)?;
    metrics.write_all(b"\n")?;
    metrics.flush()?;
    write_trace_csv(&run.trace, create(&dir.join("trace.csv"))?)
}
