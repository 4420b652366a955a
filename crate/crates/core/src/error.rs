use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{kind} index {index} out of range (size {size})")]
    InvalidIndex {
        kind: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("iteration cap of {0} reached before convergence")]
    IterationCap(usize),

    #[error("eigenvalue iteration failed to converge")]
    EigenNoConvergence,

    #[error("normalization by a zero-norm reference solution")]
    ZeroNorm,

    #[error("condition violated: {0}")]
    ConditionViolated(String),

    #[error("synchronous dataset is incomplete: {0}")]
    IncompleteDataset(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context,
                expected,
                found,
            })
        }
    }
}
