use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the matching pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("self-link on entity `{0}`")]
    SelfLink(String),

    #[error("empty entity identifier")]
    EmptyId,

    #[error("duplicate entity identifier `{0}`")]
    DuplicateId(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("invalid embedding table: {0}")]
    InvalidTable(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("undefined ratio: candidate set is empty")]
    UndefinedRatio,

    #[error("degenerate feature: zero-norm vector for `{0}`")]
    DegenerateFeature(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("probability {0} outside the clamped range; clamp before taking logits")]
    ProbabilityDomain(f64),

    #[error("instance too large for the exhaustive oracle: {0} entities (max 10)")]
    OracleTooLarge(usize),

    #[error(
        "search budget exceeded after {nodes} nodes (best objective {best_objective}, upper bound {upper_bound})"
    )]
    BudgetExceeded {
        nodes: u64,
        best_objective: f64,
        upper_bound: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
