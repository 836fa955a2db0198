use std::path::PathBuf;

use thiserror::Error;

use crate::splitting::IterationLog;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("mesh validation failed: {0}")]
    InvalidMesh(String),

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("linear solve did not reach the residual target ({residual:.3e} > {target:.3e})")]
    SolveFailed { residual: f64, target: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    EigenNotConverged {
        iterations: usize,
        estimate: f64,
        vector: Vec<f64>,
    },

    #[error("splitting aborted at iteration {iteration}: {source}")]
    SplittingAborted {
        iteration: usize,
        log: Box<IterationLog>,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown problem `{name}` (valid names: {valid})")]
    UnknownProblem { name: String, valid: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
