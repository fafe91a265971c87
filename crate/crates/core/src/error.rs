//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by dataset ingestion, statistics, audits, simulation,
/// generation, and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// I/O failure while reading or writing a file.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed CSV input.
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    /// Malformed JSON input (config, synthetic spec, ...).
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    /// A required column is missing from the input header.
    #[error("missing column {column:?} in {path}")]
    MissingColumn { column: String, path: String },

    /// A named column cannot be resolved against the record schema.
    #[error("unknown column {column:?} (not a core field or extra column)")]
    UnknownColumn { column: String },

    /// A field failed to parse; row is identified by 1-based data line.
    #[error("row {row}: cannot parse {column} value {value:?}: {reason}")]
    Parse {
        row: u64,
        column: String,
        value: String,
        reason: String,
    },

    /// A record lacks a value that the requested operation needs.
    #[error("{0}")]
    MissingValue(String),

    /// The employer merge map contains a cycle.
    #[error("employer merge map cycle involving {id:?}")]
    MergeCycle { id: String },

    /// Invalid argument to a statistical kernel.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration or synthetic spec failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The requested computation has no valid input left after filtering.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Planted-effect calibration cannot reach the requested target.
    #[error("infeasible target: {0}")]
    Infeasible(String),
}

impl Error {
    /// Wrap an I/O error with the path that produced it.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wrap a CSV error with the path that produced it. Unreadable or
    /// unwritable files surface as [`Error::Io`], not as CSV syntax.
    pub fn csv(path: impl Into<String>, source: csv::Error) -> Self {
        let path = path.into();
        if source.is_io_error() {
            if let csv::ErrorKind::Io(source) = source.into_kind() {
                return Error::Io { path, source };
            }
            unreachable!("is_io_error guarantees the Io kind");
        }
        Error::Csv { path, source }
    }

    /// Wrap a JSON error with the path that produced it.
    pub fn json(path: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
