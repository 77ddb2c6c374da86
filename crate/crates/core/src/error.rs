use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column `{column}`: {message}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: header mismatch, expected [{expected}], found [{found}]")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("duplicate key `{key}` in {table}")]
    DuplicateKey { table: &'static str, key: String },

    #[error("referential integrity: {table} references unknown account `{account_id}`")]
    UnknownAccount {
        table: &'static str,
        account_id: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("only one class present: {0}")]
    SingleClass(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("compute error: {0}")]
    Compute(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse error category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Compute,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Io { .. }
            | Error::MalformedRow { .. }
            | Error::Header { .. }
            | Error::DuplicateKey { .. }
            | Error::UnknownAccount { .. }
            | Error::InvalidData(_)
            | Error::EmptyDataset(_)
            | Error::SingleClass(_)
            | Error::SchemaMismatch(_) => ErrorKind::Data,
            Error::InvalidArgument(_) | Error::Compute(_) | Error::Json(_) => ErrorKind::Compute,
            Error::Stage { source, .. } => source.kind(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
