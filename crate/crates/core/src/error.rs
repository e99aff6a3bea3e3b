use thiserror::Error;

use crate::block::{BlockId, CoinId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("block {block} references missing ancestor {missing}")]
    MissingAncestor { block: BlockId, missing: BlockId },
    #[error("unknown coin {0}")]
    UnknownCoin(CoinId),
    #[error("block {0} is already stored")]
    Duplicate(BlockId),
    #[error("{what} out of domain: {detail}")]
    Domain { what: &'static str, detail: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { what, detail: detail.into() }
    }
}
