use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative gravity {value} at feature {index}")]
    NegativeGravity { index: usize, value: f64 },

    #[error("sample stream exhausted after {got} of {needed} samples")]
    StreamExhausted { needed: usize, got: usize },

    #[error("non-finite weight at feature {feature}{}", location(*stage, *path))]
    Diverged {
        feature: usize,
        stage: Option<usize>,
        path: Option<usize>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn location(stage: Option<usize>, path: Option<usize>) -> String {
    match (stage, path) {
        (Some(s), Some(p)) => format!(" (stage {s}, path {p})"),
        (Some(s), None) => format!(" (stage {s})"),
        (None, Some(p)) => format!(" (path {p})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// Attach stage/path coordinates to a divergence raised inside a burst.
    pub(crate) fn at(self, stage: usize, path: usize) -> Self {
        match self {
            Error::Diverged { feature, .. } => Error::Diverged {
                feature,
                stage: Some(stage),
                path: Some(path),
            },
            other => other,
        }
    }
}
