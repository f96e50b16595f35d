//! Error type shared by every stage of the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed cell or row in a data file. `line` is 1-based and includes
    /// the header row, matching what an editor shows.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A column named in the schema is missing, or the schema is unusable.
    #[error("schema error: {0}")]
    Schema(String),

    /// Timestamps that go backwards or repeat.
    #[error("ordering error at line {line}: {message}")]
    Ordering { line: u64, message: String },

    /// A gap between consecutive timestamps larger than 1.5 sample periods.
    #[error("gap error at line {line}: {message}")]
    Gap { line: u64, message: String },

    /// Input too short, window longer than signal, mismatched lengths.
    #[error("size error: {0}")]
    Size(String),

    /// Out-of-bounds region or index.
    #[error("range error: {0}")]
    Range(String),

    /// Invalid configuration or missing required parameter.
    #[error("configuration error: {0}")]
    Config(String),

    /// Unsupported or undecodable file format.
    #[error("format error: {0}")]
    Format(String),

    /// Parameter outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid synthesis specification.
    #[error("synthesis error: {0}")]
    Synth(String),

    /// A value that cannot be assigned to a band.
    #[error("classification error: {0}")]
    Classification(String),
}
