//! Crate-wide error type.

use thiserror::Error;

/// Result alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse failure at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("example {0:?} has no gold label")]
    MissingGoldLabel(String),

    #[error("class {0} has no labeled examples")]
    MissingClass(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid noise model: {0}")]
    InvalidNoiseModel(String),

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("history length mismatch: expected {expected}, got {got}")]
    HistoryLengthMismatch { expected: usize, got: usize },

    #[error("input {0} outside its valid range")]
    InputOutOfRange(&'static str),

    #[error("no verbalizer matched response {0:?}")]
    Unparseable(String),

    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),

    #[error("pseudo-label id {0:?} not present in the unlabeled set")]
    UnknownId(String),

    #[error("unknown variant {0:?}")]
    UnknownVariant(String),

    #[error("missing input for this variant: {0}")]
    MissingInput(String),

    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },

    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
