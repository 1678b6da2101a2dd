use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty index set: K = {order_cap} excludes the zero multi-index (K must be >= 1)")]
    EmptySet { order_cap: f64 },

    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("subdomain {subdomain}: collocation matrix is numerically singular (pivot ratio {pivot_ratio:.3e})")]
    IllConditioned { subdomain: usize, pivot_ratio: f64 },

    #[error(
        "subdomain {subdomain}: basis has {available} functions but {needed} nodes; \
         raise K to at least {minimal_k}"
    )]
    InsufficientBasis {
        subdomain: usize,
        needed: usize,
        available: usize,
        minimal_k: f64,
    },

    #[error("time step {k}: global system is singular (worst pivot {worst_pivot:.3e})")]
    StepFailure { k: usize, worst_pivot: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { message: String, line: Option<usize> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
