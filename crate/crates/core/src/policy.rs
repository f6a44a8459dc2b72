//! Local-agreement streaming policy.
//!
//! Each arriving chunk triggers a re-decode of the whole input so far,
//! forced to start with the committed prefix. Once `agreement_depth`
//! hypotheses exist, the longest common prefix of the most recent
//! `agreement_depth` hypotheses becomes the committed output. Commits are
//! irrevocable: the committed sequence only ever grows.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunk::{Chunk, DEFAULT_CHUNK_SECONDS};
use crate::decoder::{check_extends, DecodeError, IncrementalDecoder};
use crate::tokens::{longest_common_prefix_all, TokenError, TokenSequence, TokenizerTag};

pub const DEFAULT_AGREEMENT_DEPTH: usize = 2;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("session already finished")]
    Finished,
    #[error("out-of-order chunk: expected index {expected}, got {got}")]
    OutOfOrder { expected: u32, got: u32 },
    #[error("chunk duration {got}s differs from session duration {expected}s")]
    DurationMismatch { expected: f64, got: f64 },
    #[error("session has no chunks")]
    EmptySession,
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Token(#[from] TokenError),
}

impl PolicyError {
    pub fn is_contract_violation(&self) -> bool {
        matches!(
            self,
            PolicyError::Decode(DecodeError::ContractViolation { .. })
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub chunk_duration_s: f64,
    pub agreement_depth: usize,
    pub tag: TokenizerTag,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            chunk_duration_s: DEFAULT_CHUNK_SECONDS,
            agreement_depth: DEFAULT_AGREEMENT_DEPTH,
            tag: TokenizerTag::word(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.chunk_duration_s.is_finite() && self.chunk_duration_s > 0.0) {
            return Err(PolicyError::InvalidConfig(format!(
                "chunk duration must be positive, got {}",
                self.chunk_duration_s
            )));
        }
        if self.agreement_depth < 2 {
            return Err(PolicyError::InvalidConfig(format!(
                "agreement depth must be at least 2, got {}",
                self.agreement_depth
            )));
        }
        Ok(())
    }
}

/// Tokens appended to the output while processing chunk `chunk_index` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitEvent {
    pub tokens: Vec<String>,
    pub chunk_index: u32,
}

/// Per-utterance streaming state. Not shareable; callers serialize access.
#[derive(Debug, Clone)]
pub struct StreamSession {
    config: SessionConfig,
    chunks: Vec<Chunk>,
    committed: TokenSequence,
    /// The most recent `agreement_depth` hypotheses, oldest first.
    window: VecDeque<TokenSequence>,
    hypotheses_seen: usize,
    commit_log: Vec<CommitEvent>,
    finished: bool,
}

impl StreamSession {
    pub fn new(config: SessionConfig) -> Result<Self, PolicyError> {
        config.validate()?;
        Ok(StreamSession {
            committed: TokenSequence::empty(config.tag.clone()),
            window: VecDeque::with_capacity(config.agreement_depth),
            config,
            chunks: Vec::new(),
            hypotheses_seen: 0,
            commit_log: Vec::new(),
            finished: false,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn chunks_arrived(&self) -> usize {
        self.chunks.len()
    }

    pub fn committed(&self) -> &TokenSequence {
        &self.committed
    }

    /// The hypothesis returned for the latest chunk.
    pub fn prev_hypothesis(&self) -> Option<&TokenSequence> {
        self.window.back()
    }

    pub fn commit_log(&self) -> &[CommitEvent] {
        &self.commit_log
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Feeds one chunk through `decoder` and applies the agreement rule.
    ///
    /// Returns the newly committed tokens, or `None` when nothing new was
    /// agreed on. On error the session is left exactly as it was.
    pub fn ingest_chunk<D>(
        &mut self,
        chunk: Chunk,
        decoder: &mut D,
    ) -> Result<Option<CommitEvent>, PolicyError>
    where
        D: IncrementalDecoder + ?Sized,
    {
        if self.finished {
            return Err(PolicyError::Finished);
        }
        let expected = self.chunks.len() as u32 + 1;
        if chunk.index != expected {
            return Err(PolicyError::OutOfOrder {
                expected,
                got: chunk.index,
            });
        }
        if (chunk.duration_s - self.config.chunk_duration_s).abs() > 1e-12 {
            return Err(PolicyError::DurationMismatch {
                expected: self.config.chunk_duration_s,
                got: chunk.duration_s,
            });
        }
        if !decoder.capabilities().accepts(chunk.payload.kind()) {
            return Err(DecodeError::UnsupportedInput(chunk.payload.kind()).into());
        }

        self.chunks.push(chunk);
        let hypothesis = match decoder
            .decode(&self.chunks, &self.committed)
            .and_then(|h| check_extends(&self.committed, &h).map(|()| h))
        {
            Ok(h) => h,
            Err(e) => {
                self.chunks.pop();
                return Err(e.into());
            }
        };

        if self.window.len() == self.config.agreement_depth {
            self.window.pop_front();
        }
        self.window.push_back(hypothesis);
        self.hypotheses_seen += 1;

        if self.hypotheses_seen < self.config.agreement_depth {
            return Ok(None);
        }
        let agreed = longest_common_prefix_all(&self.window)?
            .expect("window holds agreement_depth hypotheses");
        // Every hypothesis in the window extends the committed prefix, so
        // the agreement cannot be shorter than it.
        debug_assert!(agreed.starts_with(&self.committed));
        Ok(self.commit_through(agreed.len()))
    }

    /// Ends the stream, committing whatever the last hypothesis holds beyond
    /// the committed prefix. The flush is stamped with the final chunk index.
    pub fn finish(&mut self) -> Result<Option<CommitEvent>, PolicyError> {
        if self.finished {
            return Err(PolicyError::Finished);
        }
        if self.chunks.is_empty() {
            self.finished = true;
            return Err(PolicyError::EmptySession);
        }
        let target = self.window.back().map_or(0, TokenSequence::len);
        let event = self.commit_through(target);
        self.finished = true;
        Ok(event)
    }

    fn commit_through(&mut self, len: usize) -> Option<CommitEvent> {
        let old = self.committed.len();
        if len <= old {
            return None;
        }
        let latest = self.window.back().expect("commit requires a hypothesis");
        let fresh = latest.tokens()[old..len].to_vec();
        self.committed.extend_from_slice(&fresh);
        let event = CommitEvent {
            tokens: fresh,
            chunk_index: self.chunks.len() as u32,
        };
        self.commit_log.push(event.clone());
        Some(event)
    }
}

/// Result of running a whole utterance through the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutcome {
    pub output: TokenSequence,
    pub commit_log: Vec<CommitEvent>,
    pub total_chunks: u32,
}

/// Streams `chunks` through a fresh session and flushes at the end.
pub fn run_online<D>(
    chunks: Vec<Chunk>,
    decoder: &mut D,
    config: SessionConfig,
) -> Result<StreamOutcome, PolicyError>
where
    D: IncrementalDecoder + ?Sized,
{
    let mut session = StreamSession::new(config)?;
    for chunk in chunks {
        session.ingest_chunk(chunk, decoder)?;
    }
    session.finish()?;
    Ok(StreamOutcome {
        total_chunks: session.chunks_arrived() as u32,
        output: session.committed,
        commit_log: session.commit_log,
    })
}

/// Decodes the complete input once with an empty prefix. The whole output is
/// a single commit stamped with the last chunk index.
pub fn offline_decode<D>(
    chunks: &[Chunk],
    decoder: &mut D,
    tag: TokenizerTag,
) -> Result<(TokenSequence, Option<CommitEvent>), PolicyError>
where
    D: IncrementalDecoder + ?Sized,
{
    let last = chunks.last().ok_or(PolicyError::EmptySession)?;
    let empty = TokenSequence::empty(tag);
    let output = decoder.decode(chunks, &empty)?;
    check_extends(&empty, &output)?;
    let event = (!output.is_empty()).then(|| CommitEvent {
        tokens: output.tokens().to_vec(),
        chunk_index: last.index,
    });
    Ok((output, event))
}
