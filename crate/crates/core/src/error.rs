use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("segment lookup at theta = {theta} is outside [-{tau}, 0]")]
    OutOfDomain { theta: f64, tau: f64 },

    #[error("path blew up at t = {time}{}", path_index.map(|i| format!(" (path {i})")).unwrap_or_default())]
    PathBlowup { time: f64, path_index: Option<u64> },

    #[error("noise realization does not match the event grid: {0}")]
    GridMismatch(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach a path index to a blowup error; other variants pass through.
    pub fn with_path(self, index: u64) -> Self {
        match self {
            Error::PathBlowup { time, .. } => Error::PathBlowup {
                time,
                path_index: Some(index),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
