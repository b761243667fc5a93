use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    Arity { row: usize, expected: usize, found: usize },
    #[error("more than 2 labels in column `{column}`: {labels:?}")]
    TooManyLabels { column: String, labels: Vec<String> },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dataset `{0}` has only one class")]
    SingleClass(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("leaf statistics are empty (n = 0)")]
    EmptyLeaf,
    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },
    #[error("invalid mass function: {0}")]
    InvalidMass(String),
    #[error("invalid weight function: {0}")]
    InvalidWeights(String),
    #[error("empty score vector")]
    EmptyScores,
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ragged grid, missing cells: {0:?}")]
    RaggedGrid(Vec<String>),
    #[error("model format: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
