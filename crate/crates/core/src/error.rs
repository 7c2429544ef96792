use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty set {0:?}")]
    EmptySet(String),

    #[error("incompatible sketches: {0}")]
    Mismatch(String),

    /// A simple estimator hit a degenerate count vector (division by zero).
    #[error("degenerate counts for {0} estimator")]
    Boundary(&'static str),

    #[error("likelihood is flat in the parameter")]
    FlatLikelihood,

    #[error("malformed sketch file: {0}")]
    Format(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
