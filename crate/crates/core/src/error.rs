use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes. The CLI maps each to its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Scorer,
    StaleCache,
    Consistency,
    Config,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("duplicate id {id:?} (first seen on line {first_line}, again on line {line})")]
    DuplicateId {
        id: String,
        first_line: usize,
        line: usize,
    },

    #[error("scorer backend unavailable: {0}")]
    SourceUnavailable(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("token alignment: {0}")]
    Alignment(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("duplicate logprob record for {0}")]
    DuplicateKey(String),

    #[error("logprob store is missing {} record(s), first: {}", missing.len(), missing.first().map(String::as_str).unwrap_or("?"))]
    Incomplete { missing: Vec<String> },

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("consistency: {0}")]
    Consistency(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{} pair(s) failed to score; first {}: {}", failures.len(), failures[0].0, failures[0].1)]
    PairFailures { failures: Vec<(String, String)> },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Record { .. } | Error::DuplicateId { .. } => ErrorKind::Input,
            Error::SourceUnavailable(_)
            | Error::Degenerate(_)
            | Error::Alignment(_)
            | Error::DuplicateKey(_)
            | Error::Incomplete { .. }
            | Error::PairFailures { .. } => ErrorKind::Scorer,
            Error::NonFinite(_) => ErrorKind::Numeric,
            Error::StaleCache(_) => ErrorKind::StaleCache,
            Error::Consistency(_) => ErrorKind::Consistency,
            Error::Config(_) => ErrorKind::Config,
        }
    }
}
