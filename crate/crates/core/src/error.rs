use thiserror::Error;

use crate::obstacle::IterationTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration; `field` names the offending input.
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    /// Newton failed to reach the residual tolerance.
    #[error("solver error at time level {level}: no convergence after {iterations} Newton iterations (residual {residual:e})")]
    Solver {
        level: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("convergence error: {message}")]
    Convergence {
        message: String,
        trace: Box<IterationTrace>,
    },

    #[error("input rejected: {0}")]
    Rejected(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Parse(_) | Error::Json(_) | Error::Rejected(_)
        )
    }
}
