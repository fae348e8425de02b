use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SenseError>;

#[derive(Debug, Error)]
pub enum SenseError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("acquisition already reached the last mini slot ({0})")]
    AcquisitionComplete(usize),

    #[error("malformed table: {0}")]
    MalformedTable(String),

    #[error("unsupported config schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("failed to parse config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("failed to serialize config: {0}")]
    ConfigSerialize(#[from] toml::ser::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SenseError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SenseError::InvalidConfig(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        SenseError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SenseError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(SenseError::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
