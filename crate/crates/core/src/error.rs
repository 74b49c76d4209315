use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value; `key` is the dotted path of the offending entry.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// An input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A kernel bandwidth that the grid cannot resolve.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// NaN or infinity appeared during a computation.
    #[error("numeric error at t = {t}, step {step}: {message}")]
    Numeric { t: f64, step: u64, message: String },

    /// The explicit scheme produced a negative density beyond rounding.
    #[error(
        "solver instability at t = {t}, step {step}: min density {min_value:e} at cell ({i}, {j}); \
         retry with a smaller safety factor"
    )]
    Instability {
        t: f64,
        step: u64,
        min_value: f64,
        i: usize,
        j: usize,
    },

    #[error("snapshot error in {path}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical scheme rather than of its inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. } | Error::Instability { .. })
    }

    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Resolution(_) | Error::GridMismatch(_)
        )
    }
}
