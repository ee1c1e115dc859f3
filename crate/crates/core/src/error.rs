use thiserror::Error;

use crate::hmm::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("symbol {symbol} at position {position} is outside the alphabet of {n_symbols} symbols")]
    SymbolOutOfRange {
        position: usize,
        symbol: usize,
        n_symbols: usize,
    },

    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Violation>),

    #[error("history too short: need at least {needed} values, got {got}")]
    HistoryTooShort { needed: usize, got: usize },

    #[error("k = {k} exceeds the {distinct} distinct values available")]
    TooFewDistinct { k: usize, distinct: usize },

    #[error("duplicate process id {0}")]
    DuplicateProcess(u32),

    #[error("malformed document: {0}")]
    Document(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
