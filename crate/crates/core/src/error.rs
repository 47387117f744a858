use std::path::PathBuf;

use thiserror::Error;

use crate::integrate::MonitorViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("negative time argument {0}")]
    NegativeTime(f64),

    #[error("negative coefficient: {0}")]
    NegativeCoefficient(String),

    #[error("field has non-zero mean {mean:e} (norm {norm:e}); the inverse Laplacian is undefined")]
    NonZeroMean { mean: f64, norm: f64 },

    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("state is not admissible: {0}")]
    NotAdmissible(String),

    #[error("operation requires kappa = 0, got kappa = {0}")]
    KappaNonZero(f64),

    #[error("invalid step control: {0}")]
    InvalidStepControl(String),

    #[error(transparent)]
    Monitor(#[from] MonitorViolation),

    #[error("numerical failure at t = {time}: {reason}")]
    NumericalFailure { time: f64, reason: String },

    #[error("sub-step CFL violation: {0}")]
    CflViolation(String),

    #[error("invalid Picard configuration: {0}")]
    InvalidPicardConfig(String),

    #[error("Picard iteration did not converge after {iterations} iterations (last contraction ratio {last_ratio:.4})")]
    PicardNonConvergence { iterations: usize, last_ratio: f64 },

    #[error("need at least {needed} iterations, history has {got}")]
    ShortHistory { needed: usize, got: usize },

    #[error("window must hold three states with increasing times")]
    InvalidWindow,

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("config: {0}")]
    ConfigValue(String),

    #[error("snapshot format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

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
    /// Process exit status for the command-line tool: 1 for a monitor
    /// violation, 3 for a numerical failure, 2 for configuration and
    /// input problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Monitor(v) if v.kind.is_numerical() => 3,
            Error::Monitor(_) => 1,
            Error::NumericalFailure { .. }
            | Error::CflViolation(_)
            | Error::PicardNonConvergence { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
