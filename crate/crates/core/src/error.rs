use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("kernel evaluated at its singular point z = 0; use the cell-averaged value")]
    SingularPoint,

    #[error("diffusion matrix sigma_G lost positive semi-definiteness at {} node(s): {nodes:?}", nodes.len())]
    NotPositiveSemidefinite { nodes: Vec<usize>, min_eigenvalue: f64 },

    #[error("assembly refused: n_per_axis = {n} exceeds the memory guard of {limit}")]
    MemoryGuard { n: usize, limit: usize },

    #[error("Gram matrix is numerically singular at generator {index} (relative pivot {ratio:e})")]
    SingularGram { index: usize, ratio: f64 },

    #[error("unknown geometry: {0}")]
    UnknownGeometry(String),

    #[error("point {0:?} is not on the boundary")]
    NotOnBoundary([f64; 2]),

    #[error("characteristic made more than {limit} reflections in one step (x = {x:?}, v = {v:?})")]
    TooManyReflections { limit: usize, x: [f64; 2], v: [f64; 3] },

    #[error("linear solver did not converge in {iterations} iterations (last relative residual {:e})", history.last().copied().unwrap_or(f64::NAN))]
    NoConvergence { iterations: usize, history: Vec<f64> },

    #[error("time {t} outside the ledger range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("config error at `{key}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            line,
            message: message.into(),
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}
