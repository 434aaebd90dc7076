use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range: {0}")]
    Range(String),

    #[error("name pool exhausted: {0}")]
    PoolExhausted(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("template shortage: {0}")]
    TemplateShortage(String),

    #[error("mixed-pool pair: persons {0} and {1} belong to different knowledge pools")]
    MixedPool(u32, u32),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible pairing: {0}")]
    Infeasible(String),

    #[error("insufficient samples: {0}")]
    Shortage(String),

    #[error("coverage violation: {0}")]
    Coverage(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("unknown test set `{0}`")]
    UnknownTestSet(String),

    #[error("arity error: expected {expected} trial outcomes, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("missing sample `{0}`")]
    MissingSample(String),

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("invalid attention dump: {0}")]
    InvalidDump(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// I/O failures are distinguished from validation failures so the CLI can
    /// map them to different exit codes.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
