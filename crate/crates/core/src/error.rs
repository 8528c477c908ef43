use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("Picard iteration did not converge after {iterations} iterations (relative change {change:.3e}, tolerance {tolerance:.3e}); time step too large?")]
    PicardDiverged {
        iterations: usize,
        change: f64,
        tolerance: f64,
    },

    #[error("time step collapsed to {dt:.3e} at t = {time}")]
    TimeStepCollapse { dt: f64, time: f64 },

    #[error("{} of the ensemble samples failed: {}", .0.len(), format_failures(.0))]
    SampleFailures(Vec<(usize, String)>),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_failures(failures: &[(usize, String)]) -> String {
    failures
        .iter()
        .map(|(m, e)| format!("sample {m}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Coarse classification used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Numerical,
    Io,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidGrid(_)
            | Error::GridMismatch { .. }
            | Error::InvalidParameter(_)
            | Error::Config(_) => ErrorKind::Usage,
            Error::NonFinite(_)
            | Error::PicardDiverged { .. }
            | Error::TimeStepCollapse { .. }
            | Error::SampleFailures(_)
            | Error::Invariant(_) => ErrorKind::Numerical,
            Error::Format { .. } | Error::Io { .. } => ErrorKind::Io,
        }
    }
}
