use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input fell outside the domain of a formula (corrupt observation, negative allocation).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: {what} has {actual} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A normalizing denominator fell to or below the share floor.
    #[error("degenerate denominator for {factor}: sum {sum:e} is at or below the floor")]
    Degenerate { factor: &'static str, sum: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("epoch {epoch}: {source}")]
    AtEpoch {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failure while running.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Validation(_) | Error::Parse { .. } | Error::Usage(_) => true,
            Error::AtEpoch { source, .. } => source.is_user_error(),
            _ => false,
        }
    }
}
