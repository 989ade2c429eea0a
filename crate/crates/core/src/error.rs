use thiserror::Error;

use crate::gaussian::NumericError;
use crate::store::StoreError;
use crate::trec::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("pool too small: {pool} pool has {size} embedded rows, at least 2 required")]
    PoolTooSmall { pool: &'static str, size: usize },
    #[error("missing embeddings for {missing} of {total} pool rows exceeds abort rate {max_rate}")]
    MissingEmbeddings {
        missing: usize,
        total: usize,
        max_rate: f64,
    },
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

