use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rank deficient: numerical rank {rank} < {expected} required")]
    RankDeficient { rank: usize, expected: usize },
    #[error("not underdetermined: {rows} rows >= {cols} columns")]
    NotUnderdetermined { rows: usize, cols: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("infeasible problem")]
    Infeasible,
    #[error("iteration limit {0} exceeded")]
    MaxIters(usize),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("missing field: {0}")]
    FieldMissing(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
