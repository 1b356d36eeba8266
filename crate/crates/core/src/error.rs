use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Validation(String),

    #[error("geometry domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimate {value:.6e} with error {abs_err:.3e} exceeds tolerance {tolerance:.3e}")]
    NonConvergence {
        value: f64,
        abs_err: f64,
        tolerance: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
