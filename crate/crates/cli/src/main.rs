mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pvwdn::forecast::{DailyProfile, Forecaster};
use pvwdn::harness::{
    compare_so_do, prepare, run_closed_loop, write_comparison_csv, write_run_outputs, Method,
};
use pvwdn::plant::identify_linear_model;
use pvwdn::{io, ControlError, ForecastError, HarnessError, IoError, PlantError};

use config::{CliConfig, Resolved};

#[derive(Debug, Parser)]
#[command(
    name = "pvwdn",
    version,
    about = "Stochastic MPC pump scheduling for PV-powered water networks"
)]
struct Cli {
    /// Configuration file (JSON); built-in defaults when omitted
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for experiment data and identification excitation
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Identify the linear tank model from excitation data; writes model.json
    Identify,
    /// Fit the PV forecaster on the warm-up history; writes forecaster.json
    FitForecaster,
    /// Solve the periodic reference trajectory; writes periodic.json
    Periodic,
    /// Run one closed-loop case; writes metrics.json and trace.csv
    Run {
        /// Optimization method
        #[arg(long, value_enum, default_value_t = MethodArg::So)]
        method: MethodArg,
        /// Case index of the campaign to run
        #[arg(long, default_value_t = 0)]
        case: usize,
    },
    /// Compare stochastic and deterministic optimization over all cases; writes comparison.csv
    Compare,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Stochastic (scenario) optimization
    So,
    /// Deterministic optimization on the point forecast
    Do,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::So => Method::Stochastic,
            MethodArg::Do => Method::Deterministic,
        }
    }
}

/// Failure of a command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Numerical(String),
    Config(String),
}

impl CliError {
    pub fn io(path: &Path, err: IoError) -> Self {
        Self::Io(format!("{}: {err}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Numerical(_) => 2,
            Self::Config(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(m) => write!(f, "i/o error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
            Self::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

impl From<PlantError> for CliError {
    fn from(e: PlantError) -> Self {
        match e {
            PlantError::InvalidNetwork(_)
            | PlantError::InvalidInput(_)
            | PlantError::Dimension(_) => Self::Config(e.to_string()),
            PlantError::IllConditioned { .. }
            | PlantError::TooFewSamples { .. }
            | PlantError::NoContinuousModel => Self::Numerical(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Aborted => Self::Config(e.to_string()),
            HarnessError::Io(e) => Self::Io(e.to_string()),
            HarnessError::Plant(e) => e.into(),
            HarnessError::Control(ControlError::InvalidConfig(_)) => Self::Config(e.to_string()),
            HarnessError::Forecast(ForecastError::InvalidParameter(_)) => {
                Self::Config(e.to_string())
            }
            HarnessError::Control(_) | HarnessError::Forecast(_) => Self::Numerical(e.to_string()),
        }
    }
}

impl From<ForecastError> for CliError {
    fn from(e: ForecastError) -> Self {
        HarnessError::from(e).into()
    }
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e.into()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    io::write_json(path, value).map_err(|e| CliError::io(path, e))
}

fn identify(cfg: &Resolved) -> Result<(), CliError> {
    let e = &cfg.experiment;
    let report = identify_linear_model(&e.network, &e.excitation, e.grid().step_seconds)?;
    create_out(&cfg.out)?;
    write_json(&cfg.out.join("model.json"), &report.model)?;
    write_json(&cfg.out.join("identification.json"), &report)?;
    println!("state R²: {:?}", report.r2_state);
    println!("pressure R²: {:?}", report.r2_pressure);
    println!("holdout R²: {:?}", report.holdout_r2);
    println!(
        "holdout RMSE / level span: {:?}",
        report.holdout_rmse_fraction
    );
    println!("condition number: {:.3e}", report.condition_number);
    Ok(())
}

fn fit_forecaster(cfg: &Resolved) -> Result<(), CliError> {
    let setup = prepare(&cfg.experiment, 0)?;
    let slots = cfg.experiment.grid().slots_per_day();
    let mut forecaster = Forecaster::new(cfg.experiment.forecast, slots)?;
    for (d, day) in setup.history.iter().enumerate() {
        forecaster.ingest_day(&DailyProfile::new(d, day.clone(), slots)?)?;
    }
    create_out(&cfg.out)?;
    let snapshot = forecaster.snapshot();
    write_json(&cfg.out.join("forecaster.json"), &snapshot)?;
    let m = &snapshot.multiplier_model;
    println!("days ingested: {}", snapshot.days_ingested);
    println!(
        "multiplier model: mu {:.4} phi {:.4} theta {:.4}",
        m.mu, m.phi, m.theta
    );
    Ok(())
}

fn periodic(cfg: &Resolved) -> Result<(), CliError> {
    let setup = prepare(&cfg.experiment, 0)?;
    create_out(&cfg.out)?;
    write_json(&cfg.out.join("periodic.json"), &setup.reference)?;
    println!("anchor levels: {:?}", setup.reference.anchor);
    println!("periodicity residual: {:.3e} m", setup.reference.residual);
    Ok(())
}

fn run(cfg: &Resolved, method: Method, case: usize) -> Result<(), CliError> {
    if case >= cfg.experiment.cases {
        return Err(CliError::Config(format!(
            "case {case} outside 0..{}",
            cfg.experiment.cases
        )));
    }
    let setup = prepare(&cfg.experiment, case)?;
    let output = run_closed_loop(&setup, method)?;
    write_run_outputs(&cfg.out, &output).map_err(|e| CliError::io(&cfg.out, e))?;
    let m = &output.metrics;
    println!(
        "{}: cost {:.4}, grid {:.3} kWh, pump {:.3} kWh, PV share {:.4}, violations {}",
        method.label(),
        m.total_cost,
        m.grid_energy_kwh,
        m.pump_energy_kwh,
        m.pv_share,
        m.violations.len()
    );
    Ok(())
}

fn compare(cfg: &Resolved) -> Result<(), CliError> {
    let report = compare_so_do(&cfg.experiment)?;
    create_out(&cfg.out)?;
    let path = cfg.out.join("comparison.csv");
    let file = io::create_file(&path).map_err(|e| CliError::io(&path, e))?;
    write_comparison_csv(&report, file).map_err(|e| CliError::io(&path, e))?;
    for row in &report.rows {
        println!(
            "{:<8} cost {:.4} grid {:.4}",
            row.case, row.cost_ratio, row.grid_energy_ratio
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (file, base) = CliConfig::load(cli.config.as_deref())?;
    let cfg = file.resolve(&base, cli.seed, cli.out)?;
    match cli.command {
        Command::Identify => identify(&cfg),
        Command::FitForecaster => fit_forecaster(&cfg),
        Command::Periodic => periodic(&cfg),
        Command::Run { method, case } => run(&cfg, method.into(), case),
        Command::Compare => compare(&cfg),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
