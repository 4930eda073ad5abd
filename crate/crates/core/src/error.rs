use std::path::PathBuf;

use thiserror::Error;

use crate::scenario::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown scenario id `{0}` (built-ins are 0-6)")]
    UnknownScenario(String),

    #[error("invalid parameters: {}", format_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("config error: {0}")]
    Config(String),

    #[error("day {day} is outside the sampled curve range (0..{len})")]
    DayOutOfRange { day: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("backward pass called without a matching forward cache")]
    MissingCache,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("chromosome length {got} does not match expected {expected}")]
    ChromosomeLength { expected: usize, got: usize },

    #[error("checkpoint not found: {}", .0.display())]
    MissingCheckpoint(PathBuf),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Usage(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("{}: {}", x.field, x.message))
        .collect::<Vec<_>>()
        .join("; ")
}
