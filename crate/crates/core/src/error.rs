use thiserror::Error;

/// Errors raised by measure construction, solvers and IO.
#[derive(Debug, Error)]
pub enum SotxError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative or non-finite weight {value} in {context}")]
    NegativeWeight { value: f64, context: String },

    #[error("empty measure")]
    EmptyMeasure,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("mass imbalance: source {source_mass} vs target {target_mass} (relative error {relative:.3e})")]
    MassImbalance {
        source_mass: f64,
        target_mass: f64,
        relative: f64,
    },

    #[error("problem too large: {points} points exceeds cap {cap}")]
    SizeCap { points: usize, cap: usize },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SotxError>;
