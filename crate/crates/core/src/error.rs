use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("hidden width {hidden_width} is below the minimum width {minimum} for {input_dim} inputs")]
    WidthTooSmall {
        input_dim: usize,
        hidden_width: usize,
        minimum: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("loss became non-finite at epoch {epoch}")]
    NanLoss { epoch: usize },

    #[error("model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this error comes from a numeric failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NumericOverflow(_) | Error::NanLoss { .. })
    }
}
