//! Top-level error type of the command-line front end.

use thiserror::Error;

use crate::circuits::CircuitError;
use crate::config::ConfigError;
use crate::estimation::EstimationError;
use crate::fock::FockError;
use crate::io::FormatError;
use crate::protocols::ProtocolError;
use crate::source::SourceError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("input: {0}")]
    Format(#[from] FormatError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error("output: {0}")]
    Output(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 for bad configuration or input, 3 for numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Format(_) => 2,
            Error::Estimation(e) if e.is_input_error() => 2,
            Error::Protocol(e) if e.is_input_error() => 2,
            Error::Source(e) if e.is_input_error() => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
