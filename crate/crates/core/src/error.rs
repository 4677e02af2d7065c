use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} modes, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("t = {t} is outside the domain of the decay law (requires {requirement})")]
    OutOfDomain { t: f64, requirement: &'static str },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("exact cover search is capped at {cap} points, got {points}")]
    ExactCapExceeded { points: usize, cap: usize },

    #[error("numerical blow-up at t = {time}")]
    BlowUp { time: f64 },

    #[error("horizon {horizon} needs {steps} steps, more than the limit {limit}")]
    StepLimit { horizon: f64, steps: u64, limit: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("phase norm still growing at the horizon (window max {late} vs {early})")]
    NonDissipative { early: f64, late: f64 },

    #[error("covering radius {radius} is below the distance floor {floor}")]
    DegenerateRadius { radius: f64, floor: f64 },

    #[error("quantization step shrank below {floor} without meeting the continuity budget")]
    ContinuityBudget { floor: f64 },

    #[error("t = {t} is outside the covered window [{lo}, {hi}]")]
    OutsideCoverage { t: f64, lo: f64, hi: f64 },

    #[error("need at least {needed} trace values above the floor, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("fitted rate {rate} is not positive: trace does not decay")]
    NonDecaying { rate: f64 },

    #[error("no pairs satisfy the closeness threshold {threshold}")]
    NoConditionedPairs { threshold: f64 },

    #[error("malformed input {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_blow_up(&self) -> bool {
        matches!(self, Error::BlowUp { .. })
    }

    /// Errors caused by the user's input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::Parse { .. }
                | Error::DimensionMismatch { .. }
                | Error::ExactCapExceeded { .. }
                | Error::OutOfDomain { .. }
        )
    }
}
