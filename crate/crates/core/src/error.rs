use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("wavenumber index {index} out of range on axis {axis} (n = {n})")]
    IndexOutOfRange { axis: usize, index: i64, n: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid spectral data: imaginary residue {residue:e} exceeds tolerance")]
    InvalidSpectralData { residue: f64 },

    #[error("obstacle violated at lattice index {index}: u = {value} > 1/4")]
    ObstacleViolation { index: usize, value: f64 },

    #[error("argument {value} outside the domain of the potential (s <= 1/4)")]
    PotentialDomain { value: f64 },

    #[error("non-finite state produced at step {step}")]
    Divergence { step: u64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid study: {0}")]
    InvalidStudy(String),

    #[error("{}", config_message(.key, .line, .message))]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn config_message(key: &str, line: &Option<usize>, message: &str) -> String {
    match line {
        Some(line) => format!("config error at line {line}, key `{key}`: {message}"),
        None => format!("config error, key `{key}`: {message}"),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
