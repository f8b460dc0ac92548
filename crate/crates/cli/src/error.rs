//! Harness-level errors.
//!
//! Ingestion problems carry file/row/column diagnostics; everything the
//! core library reports is passed through unchanged.

use std::fmt;
use std::path::Path;

use thiserror::Error;

/// A malformed corpus file: where it is and what is wrong with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub file: String,
    /// 1-based data row (the header is row 0), when the problem is row-local.
    pub row: Option<u64>,
    pub column: Option<String>,
    pub message: String,
}

impl SchemaError {
    pub fn new(file: &Path, message: impl Into<String>) -> SchemaError {
        SchemaError {
            file: file.display().to_string(),
            row: None,
            column: None,
            message: message.into(),
        }
    }

    pub fn at(mut self, row: u64, column: impl Into<String>) -> SchemaError {
        self.row = Some(row);
        self.column = Some(column.into());
        self
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "schema error in `{}`", self.file)?;
        if let Some(row) = self.row {
            write!(f, ", row {row}")?;
        }
        if let Some(column) = &self.column {
            write!(f, ", column `{column}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for SchemaError {}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Schema(#[from] SchemaError),

    #[error(transparent)]
    Core(#[from] tscombine_core::Error),

    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in `{path}`: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("results store `{path}` has unsupported version line `{found}` (expected `#{expected}`)")]
    StoreVersion { path: String, found: String, expected: &'static str },

    #[error("empty results store: no successful records to report on")]
    EmptyStore,

    #[error("report error: {0}")]
    Report(String),
}

impl HarnessError {
    /// Attaches the offending path to an I/O error.
    pub fn io(path: &Path, source: std::io::Error) -> HarnessError {
        HarnessError::Io { path: path.display().to_string(), source }
    }

    /// Attaches the offending path to a CSV error.
    pub fn csv(path: &Path, source: csv::Error) -> HarnessError {
        HarnessError::Csv { path: path.display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_error_formats_location() {
        let err = SchemaError::new(Path::new("data/a.csv"), "missing target cell").at(5, "target");
        assert_eq!(
            err.to_string(),
            "schema error in `data/a.csv`, row 5, column `target`: missing target cell"
        );
    }

    #[test]
    fn schema_error_without_location_stays_terse() {
        let err = SchemaError::new(Path::new("b.csv"), "no `target` column");
        assert_eq!(err.to_string(), "schema error in `b.csv`: no `target` column");
    }

    #[test]
    fn core_errors_pass_through() {
        let core = tscombine_core::Error::EmptyPool;
        let err: HarnessError = core.into();
        assert_eq!(err.to_string(), "empty model pool");
    }
}
