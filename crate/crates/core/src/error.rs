use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("duplicate row in relation: {0:?}")]
    DuplicateRow(Vec<String>),

    #[error("duplicate key at logical position {logical}")]
    DuplicateKey { logical: u64 },

    #[error("cells not sorted: logical position {current} follows {previous}")]
    NotSorted { previous: u64, current: u64 },

    #[error("value {value:?} is not in the directory of dimension {dimension}")]
    UnknownDimensionValue { dimension: usize, value: String },

    #[error("{what} {value} is out of range 1..={max}")]
    OutOfRange {
        what: &'static str,
        value: u64,
        max: u64,
    },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("row count {rows} exceeds the cell count {cells}")]
    ImpossibleDensity { rows: u64, cells: u128 },

    #[error("density is zero, the space ratio is undefined")]
    UndefinedDensity,

    #[error("conjoint over the whole key (h = k = {0}) is degenerate")]
    DegenerateConjoint(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("relation is empty")]
    EmptyRelation,

    #[error("corrupt {file}: {reason}")]
    Corrupt { file: PathBuf, reason: String },

    #[error("missing {0}")]
    Missing(PathBuf),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn corrupt(file: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            file: file.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
