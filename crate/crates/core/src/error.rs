use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solver, optimizer and CLI layers.
#[derive(Debug, Error)]
pub enum OncoError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid value for `{key}`: {msg}")]
    Validation { key: String, msg: String },

    #[error("step {step}: velocity {speed:.6e} exceeds the CFL reference speed {v_ref:.6e}")]
    Stability { step: usize, speed: f64, v_ref: f64 },

    #[error("step {step}: {field} dropped to {value:.3e}, below the negativity tolerance")]
    Negativity {
        step: usize,
        field: &'static str,
        value: f64,
    },

    #[error("step {step}: non-finite value in {field}")]
    NonFinite { step: usize, field: &'static str },

    #[error("{0}")]
    Usage(String),

    #[error("line search found no decrease after {halvings} halvings at iteration {iteration}")]
    LineSearch { iteration: usize, halvings: usize },

    #[error("drug concentration is identically zero; peak time undefined")]
    NoDrug,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl OncoError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            OncoError::Parse { .. } | OncoError::Validation { .. } | OncoError::Usage(_) => 2,
            OncoError::Stability { .. }
            | OncoError::Negativity { .. }
            | OncoError::NonFinite { .. } => 3,
            OncoError::LineSearch { .. } => 4,
            OncoError::NoDrug | OncoError::Io(_) | OncoError::Csv(_) => 1,
        }
    }

    pub(crate) fn validation(key: &str, msg: impl Into<String>) -> Self {
        OncoError::Validation {
            key: key.to_string(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, OncoError>;
