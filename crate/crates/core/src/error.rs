use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator and its solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible layout: {0}")]
    InfeasibleLayout(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// A solver hit its iteration cap; `best` carries the best iterate found.
    #[error("solver failure: {message}")]
    SolverFailure {
        message: String,
        best: Option<Box<nalgebra::DMatrix<num_complex::Complex64>>>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
