//! Crate-wide error type.
//!
//! Messages are prefixed with the module they originate from so callers (in
//! particular the CLI) can surface them verbatim.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // data
    #[error("data: cannot read {path}: {source}")]
    FileRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("data: cannot write {path}: {source}")]
    FileWrite {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("data: malformed csv: {0}")]
    Csv(String),
    #[error("data: target column {0:?} not found")]
    MissingTarget(String),
    #[error("data: missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: String },
    #[error("data: row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("data: dataset is empty")]
    EmptyDataset,
    #[error("data: {0}")]
    InvalidDataset(String),
    #[error("data: fold count {k} invalid for {n} observations")]
    InvalidFolds { k: usize, n: usize },

    // forest
    #[error("forest: invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("forest: {0}")]
    TaskMismatch(String),
    #[error("forest: bag would be empty (sample fraction {fraction} of {n} observations)")]
    EmptyBag { fraction: f64, n: usize },
    #[error("forest: impurity of an empty node is undefined")]
    EmptyNode,
    #[error("forest: schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("forest: unsupported model file version {0:?}")]
    ModelVersion(String),
    #[error("forest: corrupt model file: {0}")]
    ModelCorrupt(String),
    #[error("forest: {0}")]
    Forest(String),

    // metrics
    #[error("metrics: input vectors are empty")]
    EmptyInput,
    #[error("metrics: length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("metrics: auc needs both classes present")]
    SingleClass,
    #[error("metrics: malformed probability vector: {0}")]
    MalformedProbability(String),
    #[error("metrics: measure {measure} is incompatible: {reason}")]
    IncompatibleMeasure { measure: String, reason: String },

    // oob
    #[error("oob: no out-of-bag observations")]
    NoOobObservations,
    #[error("oob: {0}")]
    Oob(String),

    // space
    #[error("space: dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("space: grid of {size} points exceeds cap of {cap}")]
    GridTooLarge { size: usize, cap: usize },
    #[error("space: {0}")]
    Space(String),

    // smbo
    #[error("smbo: surrogate needs at least 2 evaluated design points, got {0}")]
    TooFewDesignPoints(usize),
    #[error("smbo: non-finite objective value")]
    NonFiniteObjective,
    #[error("smbo: every warmup evaluation failed")]
    AllEvaluationsFailed,
    #[error("smbo: {0}")]
    Smbo(String),

    // tuner
    #[error("tuner: {0}")]
    Tuner(String),

    // bench
    #[error("bench: every method failed on dataset {0:?}")]
    AllMethodsFailed(String),
    #[error("bench: {0}")]
    Bench(String),
}
