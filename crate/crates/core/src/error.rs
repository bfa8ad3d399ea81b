use std::fmt;

use thiserror::Error;

/// A single invariant violation found while validating a trajectory set.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroWindow,
    ZeroStateDim,
    EmptyStates { index: usize },
    StartBeforeOne { index: usize, start: usize },
    ExceedsWindow { index: usize, end: usize, window: usize },
    StateDimMismatch { index: usize, step: usize, expected: usize, found: usize },
    NonFiniteState { index: usize, step: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroWindow => write!(f, "window must be at least 1"),
            Violation::ZeroStateDim => write!(f, "state_dim must be at least 1"),
            Violation::EmptyStates { index } => {
                write!(f, "trajectory {index}: empty state list")
            }
            Violation::StartBeforeOne { index, start } => {
                write!(f, "trajectory {index}: start {start} is before time step 1")
            }
            Violation::ExceedsWindow { index, end, window } => write!(
                f,
                "trajectory {index}: last time step {end} exceeds window {window}"
            ),
            Violation::StateDimMismatch { index, step, expected, found } => write!(
                f,
                "trajectory {index}, state {step}: state_dim mismatch (expected {expected}, found {found})"
            ),
            Violation::NonFiniteState { index, step } => {
                write!(f, "trajectory {index}, state {step}: non-finite component")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid trajectory set: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state space too large: {size} exceeds cap {cap}; use the LP or ADMM solver")]
    StateSpaceTooLarge { size: u128, cap: u128 },

    #[error("LP solver: {0}")]
    Solver(String),

    #[error("infeasible weights: {0}")]
    InfeasibleWeights(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl MetricError {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            MetricError::StateSpaceTooLarge { .. } | MetricError::Solver(_) => 3,
            MetricError::Io(_) | MetricError::Csv(_) => 4,
            MetricError::Json(e) if e.is_io() => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, MetricError>;
