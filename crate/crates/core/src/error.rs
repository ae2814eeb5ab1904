use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("step size {h:e} fell below h_min at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("integration exceeded {max_steps} steps (reached t = {t})")]
    MaxStepsExceeded { max_steps: usize, t: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("t = {t} outside trajectory domain [{t0}, {tf}]")]
    OutOfDomain { t: f64, t0: f64, tf: f64 },
    #[error("non-finite result: {0}")]
    NonFiniteResult(String),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("derivative {derivative} failed validation (rel. error {rel_error:e}) at sample {sample}")]
    ValidationFailed {
        derivative: String,
        sample: usize,
        rel_error: f64,
    },
    #[error("measurement covariance is singular")]
    SingularCovariance,
    #[error("information matrix is singular (lambda_min = {lambda_min:e}); unidentifiable direction {null_direction:?}")]
    SingularInformation {
        lambda_min: f64,
        null_direction: Vec<f64>,
    },
    #[error("minimum eigenvalue is repeated (gap {gap:e})")]
    DegenerateEigenvalue { gap: f64 },
    #[error("line search failed after {backtracks} backtracks")]
    LinesearchFailed { backtracks: usize },
    #[error("Riccati solution became non-finite at t = {t}")]
    RiccatiBlowup { t: f64 },
    #[error("trajectory still carries no information along {null_direction:?}; add sensors or drop a parameter")]
    StillSingular { null_direction: Vec<f64> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
            _ => Error::Parse(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
