use std::path::PathBuf;

use thiserror::Error;

use crate::data::Axis;

/// Errors produced by estimation, regression and data handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("regularized system is singular or not positive definite")]
    SingularSystem,

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("function returned a non-finite value during evaluation")]
    NonFiniteEvaluation,

    #[error("degenerate kernel width: {0}")]
    DegenerateWidth(f64),

    #[error("{0} has zero variance")]
    ZeroVariance(Axis),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("non-finite {axis} value at index {index}")]
    NonFiniteInput { axis: Axis, index: usize },

    #[error("parse error at row {row}, column {column}")]
    ParseError { row: usize, column: Axis },

    #[error("missing column: {0}")]
    MissingColumn(String),

    #[error("unknown data family: {0}")]
    UnknownFamily(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
