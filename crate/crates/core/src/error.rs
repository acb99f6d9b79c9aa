use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unparseable value at row {row}, column `{col}`: {value:?}")]
    UnparseableValue {
        row: usize,
        col: String,
        value: String,
    },

    #[error("unknown category {token:?} in column `{column}`")]
    UnknownCategory { column: String, token: String },

    #[error("file contains no data rows")]
    EmptyFile,

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid split: n_train = {n_train} with {n} samples")]
    InvalidSplit { n_train: usize, n: usize },

    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("sensitive group {0} has no samples")]
    EmptyGroup(u8),

    #[error("invalid batch size {size} for {n} samples")]
    InvalidBatchSize { size: usize, n: usize },

    #[error("iterate became non-finite at iteration {iter}")]
    NonFiniteIterate { iter: usize },

    #[error("front is empty")]
    EmptyFront,

    #[error("benchmark violated: f1 = {f1} is not below f_f = {ff}")]
    BenchmarkViolated { f1: f64, ff: f64 },

    #[error("schema mismatch: model digest {model} does not match data digest {data}")]
    SchemaMismatch { model: String, data: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for a violated benchmark,
    /// 4 for a schema mismatch, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BenchmarkViolated { .. } => 3,
            Error::SchemaMismatch { .. } => 4,
            Error::NonFiniteIterate { .. } | Error::EmptyFront | Error::Io(_) => 1,
            _ => 2,
        }
    }
}
