use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("day {day} has no production (all samples are zero)")]
    AllZeroDay { day: usize },
    #[error("shape has zero energy over the regression window")]
    DegenerateShape,
    #[error("insufficient history: need {needed} days, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("profile length {got} does not match {expected} samples per day")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative or non-finite sample {value} at slot {slot}")]
    InvalidSample { slot: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time {t} s is outside the covered range")]
    OutOfRange { t: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("regressor matrix is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("identification needs at least {needed} usable samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid plant input: {0}")]
    InvalidInput(String),
    #[error("identified discrete dynamics have no real matrix logarithm")]
    NoContinuousModel,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
    #[error("no previous solution available for the fallback input")]
    NoHistory,
    #[error("periodic trajectory does not close: residual {residual:.3e} m")]
    PeriodicityGap { residual: f64 },
    #[error("problem data does not cover the horizon: {0}")]
    Coverage(String),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("first solve failed and no fallback is available")]
    Aborted,
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("invalid bounds at coordinate {index}: [{lower}, {upper}]")]
    InvalidBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
}
