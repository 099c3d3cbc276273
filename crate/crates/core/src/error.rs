use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance failed validation: {}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("dimension mismatch: expected {expected} {what}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown {kind} `{token}`")]
    UnknownToken { kind: &'static str, token: String },

    #[error("index {index} out of range for {what} (size {size})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("calibration log is empty")]
    EmptyLog,

    #[error("enumeration budget exceeded: need {required} {unit}, budget is {budget}")]
    Budget {
        unit: &'static str,
        required: f64,
        budget: f64,
    },

    #[error("no feasible plan with cost <= {cap}")]
    InfeasibleWithinCap { cap: f64 },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
