use std::io;

use thiserror::Error;

/// Errors raised by the sampler library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// An experiment configuration could not be parsed or is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// A series has zero empirical variance.
    #[error("degenerate series: {0}")]
    Degenerate(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed chain file: {0}")]
    ChainFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
