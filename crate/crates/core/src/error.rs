use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A factorization or solve failed. `condition` is an estimate of the
    /// condition number of the offending (equilibrated) matrix.
    #[error("numerical failure in {context} (condition estimate {condition:.3e})")]
    Numerical { context: String, condition: f64 },

    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    #[error("epoch at t={got} s precedes previous epoch at t={last} s")]
    OutOfOrder { last: f64, got: f64 },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(context: impl Into<String>, condition: f64) -> Self {
        Error::Numerical {
            context: context.into(),
            condition,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for configuration / schema problems (CLI exit code 2).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Json(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
