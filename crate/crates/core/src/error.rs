use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StmError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sampling failed at iteration {iteration}: {source}")]
    Sampling {
        iteration: usize,
        #[source]
        source: Box<StmError>,
    },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("singular design: {0}")]
    Singular(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("empty chain")]
    EmptyChain,

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, StmError>;

impl StmError {
    /// Short stable name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            StmError::Dimension(_) => "dimension",
            StmError::Parameter(_) => "parameter",
            StmError::Domain(_) => "domain",
            StmError::Sampling { .. } => "sampling",
            StmError::Generation(_) => "generation",
            StmError::Singular(_) => "singular",
            StmError::Format { .. } => "format",
            StmError::Config(_) => "config",
            StmError::EmptyChain => "empty-chain",
            StmError::Io { .. } => "io",
            StmError::Csv(_) => "csv",
            StmError::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StmError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        StmError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
