use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("shape mismatch: expected {expected}, got {actual} ({context})")]
    Shape {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("activation cache does not match this network: {0}")]
    Cache(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("measure `{0}` has not been trained")]
    NotTrained(String),

    #[error("data error in {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("class `{class}` has {count} members, fewer than the {folds} folds requested")]
    Stratification {
        class: String,
        count: usize,
        folds: usize,
    },

    #[error("retrieval protocol: {0}")]
    Protocol(String),

    #[error("projection error: {0}")]
    Projection(String),

    #[error("hash mismatch for {path}: expected {expected}, found {actual}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidLayout(_) | Error::Json(_) => ErrorClass::Config,
            Error::Data { .. }
            | Error::Parse { .. }
            | Error::Stratification { .. }
            | Error::HashMismatch { .. }
            | Error::Csv(_)
            | Error::Io(_) => ErrorClass::Data,
            Error::Shape { .. }
            | Error::Cache(_)
            | Error::NotTrained(_)
            | Error::Protocol(_)
            | Error::Projection(_) => ErrorClass::Runtime,
        }
    }

    pub(crate) fn shape(expected: usize, actual: usize, context: &'static str) -> Self {
        Error::Shape {
            expected,
            actual,
            context,
        }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: message.into(),
        }
    }
}
