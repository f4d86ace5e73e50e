use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("target proportion {target} unreachable within intercept bracket [{lo}, {hi}] (attained range {attained_lo}..{attained_hi})")]
    CalibrationUnreachable {
        target: f64,
        lo: f64,
        hi: f64,
        attained_lo: f64,
        attained_hi: f64,
    },

    #[error("calibration did not reach tolerance: residual {residual:e} after bisection")]
    CalibrationTolerance { residual: f64 },

    #[error("design matrix is singular: column `{column}` (index {index}) is linearly dependent on earlier columns")]
    Singular { column: String, index: usize },

    #[error("need more observations than coefficients: n_obs = {n_obs}, q = {q}")]
    TooFewObservations { n_obs: usize, q: usize },

    #[error(
        "too few complete cases to fit the imputation model: {complete} complete cases, {required} required"
    )]
    TooFewCompleteCases { complete: usize, required: usize },

    #[error("response must be binary (0/1); found {0}")]
    NonBinaryResponse(f64),

    #[error("imputation roster mismatch: {0}")]
    RosterMismatch(String),

    #[error("model variant `{variant}` is inapplicable: column `{column}` is constant")]
    InapplicableVariant { variant: String, column: String },

    #[error("complete data required at deployment: x1 is absent and missing values are not allowed")]
    CompleteDataRequired,

    #[error("imputation model uses the outcome, which is unavailable at prediction time")]
    OutcomeInImputation,

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("method `{method}` is incompatible with strategy `{strategy}` and variant `{variant}`")]
    IncompatibleStrategy {
        method: String,
        strategy: String,
        variant: String,
    },

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("malformed model artifact at line {line}: {reason}")]
    Artifact { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("csv error: {0}")]
    Csv(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
