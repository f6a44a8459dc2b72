//! The incremental decoder interface and its reference backends.
//!
//! A decoder receives every chunk seen so far together with the committed
//! prefix and returns a full hypothesis that begins with that prefix (forced
//! decoding). Backends are stateless across calls: the growing input is
//! re-decoded from scratch each time.

use std::time::Duration;

use thiserror::Error;

use crate::chunk::{Chunk, InputKind};
use crate::tokens::{TokenError, TokenSequence};

pub mod remote;
pub mod scripted;
pub mod toy;
pub mod wire;

pub use remote::{
    serve_decoder, DecoderFactory, DecoderServer, RemoteDecoder, DEFAULT_REMOTE_TIMEOUT,
};
pub use scripted::{nature_transcript, ScriptStep, ScriptTranscript, ScriptedDecoder};
pub use toy::{TailGuessMode, ToyDecoder, ToyTranslatorSpec};

/// What a backend accepts and guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub accepts_frames: bool,
    pub accepts_tokens: bool,
    /// Same inputs always give the same hypothesis.
    pub deterministic: bool,
    /// One instance may serve several sessions at once.
    pub concurrent: bool,
}

impl Capabilities {
    pub fn accepts(&self, kind: InputKind) -> bool {
        match kind {
            InputKind::Frames => self.accepts_frames,
            InputKind::Tokens => self.accepts_tokens,
        }
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("hypothesis `{hypothesis}` does not extend committed prefix `{committed}`")]
    ContractViolation {
        committed: TokenSequence,
        hypothesis: TokenSequence,
    },
    #[error("script exhausted: {requested} chunks requested, {available} scripted")]
    ScriptExhausted { requested: usize, available: usize },
    #[error("unknown source token `{0}`")]
    Vocabulary(String),
    #[error("backend does not accept {0:?} input")]
    UnsupportedInput(InputKind),
    #[error("transport error talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no response from {endpoint} within {after:?}")]
    Timeout { endpoint: String, after: Duration },
    #[error("backend reported: {0}")]
    Backend(String),
    #[error(transparent)]
    Token(#[from] TokenError),
}

impl DecodeError {
    /// Transport failures may succeed on retry; everything else is permanent.
    pub fn is_retriable(&self) -> bool {
        matches!(
            self,
            DecodeError::Transport { .. } | DecodeError::Timeout { .. }
        )
    }
}

pub trait IncrementalDecoder {
    fn capabilities(&self) -> Capabilities;

    /// Decodes `input` (all chunks so far, in order) and returns a full
    /// hypothesis that starts with `committed`.
    fn decode(
        &mut self,
        input: &[Chunk],
        committed: &TokenSequence,
    ) -> Result<TokenSequence, DecodeError>;
}

impl<D: IncrementalDecoder + ?Sized> IncrementalDecoder for Box<D> {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }

    fn decode(
        &mut self,
        input: &[Chunk],
        committed: &TokenSequence,
    ) -> Result<TokenSequence, DecodeError> {
        (**self).decode(input, committed)
    }
}

/// Checks the forced-prefix contract.
pub fn check_extends(
    committed: &TokenSequence,
    hypothesis: &TokenSequence,
) -> Result<(), DecodeError> {
    committed.check_comparable(hypothesis)?;
    if hypothesis.starts_with(committed) {
        Ok(())
    } else {
        Err(DecodeError::ContractViolation {
            committed: committed.clone(),
            hypothesis: hypothesis.clone(),
        })
    }
}
