use std::path::PathBuf;

use crate::tensor::Shape;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs} vs {rhs}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Shape,
        rhs: Shape,
    },
    #[error("invalid argument to {op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("backward requires a scalar loss of shape (1,1,1,1), got {0}")]
    NonScalarLoss(Shape),
    #[error("loss tensor is not connected to the tape")]
    Detached,
    #[error("tape has already been consumed by a previous backward pass")]
    TapeConsumed,
    #[error("tensor belongs to a different tape")]
    ForeignTensor,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {reason}")]
    Data { path: PathBuf, reason: String },
    #[error("non-finite loss at iteration {iteration}")]
    Diverged { iteration: u64 },
    #[error("non-finite gradient for parameter {0}; step rejected")]
    NonFiniteGradient(String),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
