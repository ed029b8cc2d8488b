//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed indices, dimensions, or parameters that violate an
    /// operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A distribution spec whose rejection loop cannot land in (-1, 1).
    #[error("degenerate distribution spec: {0}")]
    DegenerateSpec(String),

    /// Numerical failure (eigendecomposition, divergence, non-finite values).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Input data failed a structural validation check.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Malformed line in an input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// SGD training produced non-finite parameters.
    #[error("training diverged at epoch {epoch}: {msg}")]
    Divergence { epoch: usize, msg: String },

    /// A failing trajectory, tagged with its index.
    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Wraps an error with the trajectory index that produced it.
    pub fn in_trajectory(self, index: usize) -> Self {
        Error::Trajectory {
            index,
            source: Box::new(self),
        }
    }
}
