use thiserror::Error;

/// Errors produced by the sampling, spectral and statistics layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("eigenvalue {index} did not converge within {budget} iterations")]
    NoConvergence { index: usize, budget: usize },

    #[error("divergent integral: {message} (partial sums: {partial_sums:?})")]
    Divergence {
        message: String,
        partial_sums: Vec<f64>,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("replica {replica} failed: {source}")]
    Replica {
        replica: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
