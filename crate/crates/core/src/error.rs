//! Error taxonomy shared across the pipeline.

use std::io;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or mismatched input structure: headers, column sets, label schemas.
    #[error("schema error: {0}")]
    Schema(String),
    /// Invalid argument or configuration value.
    #[error("argument error: {0}")]
    Argument(String),
    /// A data row that cannot be ingested.
    #[error("row error at line {line}: {message}")]
    Row { line: u64, message: String },
    /// A column that cannot be cleaned or encoded.
    #[error("column '{column}': {message}")]
    Column { column: String, message: String },
    /// Unreadable or unsupported serialized artifact data.
    #[error("format error: {0}")]
    Format(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for argument errors, 3 for schema-class errors
    /// (schema, row, column, format), 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) => 2,
            Error::Schema(_) | Error::Row { .. } | Error::Column { .. } | Error::Format(_) => 3,
            Error::Io { .. } => 4,
        }
    }

    /// Prefix the error message with a pipeline stage name.
    pub(crate) fn with_stage(self, stage: &str) -> Self {
        match self {
            Error::Schema(m) => Error::Schema(format!("[{stage}] {m}")),
            Error::Argument(m) => Error::Argument(format!("[{stage}] {m}")),
            Error::Row { line, message } => Error::Row {
                line,
                message: format!("[{stage}] {message}"),
            },
            Error::Column { column, message } => Error::Column {
                column,
                message: format!("[{stage}] {message}"),
            },
            Error::Format(m) => Error::Format(format!("[{stage}] {m}")),
            Error::Io { path, source } => Error::Io {
                path: format!("[{stage}] {path}"),
                source,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_class() {
        assert_eq!(Error::Argument("x".into()).exit_code(), 2);
        assert_eq!(Error::Schema("x".into()).exit_code(), 3);
        assert_eq!(
            Error::Row {
                line: 3,
                message: "bad".into()
            }
            .exit_code(),
            3
        );
        assert_eq!(
            Error::io("f", io::Error::new(io::ErrorKind::NotFound, "gone")).exit_code(),
            4
        );
    }
}
