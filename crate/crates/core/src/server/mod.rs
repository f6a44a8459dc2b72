//! Session-oriented streaming service over newline-delimited JSON.

use thiserror::Error;

pub mod client;
pub mod envelope;
pub mod registry;
pub mod service;

pub use client::StreamClient;
pub use envelope::{ClientEnvelope, ServerEnvelope, STATUS_EMPTY_SESSION};
pub use registry::BackendRegistry;
pub use service::{ServerLimits, StreamServer};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("connection closed by peer")]
    Closed,
    #[error("server refused: {0:?}")]
    Refused(ServerEnvelope),
}
