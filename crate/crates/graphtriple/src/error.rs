//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    Rejected(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("parity error: {0}")]
    Parity(String),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
