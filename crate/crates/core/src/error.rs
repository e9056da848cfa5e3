use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: value is not finite")]
    NonFinite { row: usize, column: String },

    #[error("row {row}: target value `{value}` is not 0 or 1")]
    InvalidTarget { row: usize, value: String },

    #[error("target column `{0}` not found in header")]
    MissingTarget(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("target must contain both classes")]
    SingleClass,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("unknown feature(s): {}", .0.join(", "))]
    UnknownFeatures(Vec<String>),

    #[error("feature `{0}` listed more than once")]
    DuplicateFeature(String),

    #[error("feature `{0}` is constant")]
    ConstantFeature(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("no resample containing both classes after {0} attempts")]
    BootstrapExhausted(usize),

    #[error("correlation block {0:?} is not positive definite")]
    NotPositiveDefinite(Vec<usize>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("expected {expected} columns, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("operation requires a {expected} model, got {actual}")]
    WrongModelKind {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("unknown metric `{0}` (expected one of: naupdc, auc, bss, ncsi)")]
    UnknownMetric(String),

    #[error("unknown loss `{0}` (expected one of: cross_entropy, mse)")]
    UnknownLoss(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} has zero variance")]
    ZeroVariance(&'static str),

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("all ranking methods agree exactly; uncertainty ratio is undefined")]
    DegenerateAgreement,

    #[error("no features retained at C = {0}; try a larger C")]
    NoFeaturesRetained(f64),

    #[error("mismatched feature sets between `{0}` and `{1}`")]
    MismatchedFeatures(String, String),

    #[error("{failures} of {total} subset retrainings failed")]
    TooManyFailures { failures: usize, total: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
