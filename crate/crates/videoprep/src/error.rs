//! Crate-wide error type and result alias.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by manifest IO, filters, sampling, and the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("duplicate record id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample {sample_id:?} has length {length} exceeding budget {budget}")]
    OversizedSample {
        sample_id: String,
        length: u64,
        budget: u64,
    },

    #[error("no templates registered for task type {0:?}")]
    MissingTemplates(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// IO error carrying the path it happened on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Io { .. }
            | Error::Json(_)
            | Error::DuplicateId { .. }
            | Error::Shape(_)
            | Error::InvalidArgument(_)
            | Error::OversizedSample { .. }
            | Error::MissingTemplates(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
