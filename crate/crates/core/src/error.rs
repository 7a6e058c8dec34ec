use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{function}: argument {x:e} lies below the domain [0, inf)")]
    Domain { function: String, x: f64 },

    #[error("matrix is indefinite: remaining pivot {pivot:e} at step {step} is below -{tolerance:e}")]
    Indefinite { step: usize, pivot: f64, tolerance: f64 },

    #[error("triangular factor is singular at diagonal index {index}")]
    Singular { index: usize },

    #[error("matrix is not symmetric: max asymmetry {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("secular equation failed to converge on interval {interval}")]
    NoConvergence { interval: usize },

    #[error("leave-one-out downdate needs full numerical rank, got rank {rank} with k = {k}")]
    RankDeficient { rank: usize, k: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("problem size {n} exceeds the dense limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Line-level failures while reading text inputs. Line numbers are 1-based.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },

    #[error("line {line}: malformed entry: {reason}")]
    MalformedEntry { line: usize, reason: String },

    #[error("line {line}: index ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    OutOfRange {
        line: usize,
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("line {line}: duplicate entry ({row}, {col})")]
    Duplicate { line: usize, row: usize, col: usize },

    #[error("expected {expected} entries, found {found}")]
    EntryCount { expected: usize, found: usize },

    #[error("no data")]
    Empty,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
