//! JSON-lines envelopes exchanged with streaming clients.
//!
//! Client to server:
//! `{"type":"open","session":"s1","chunk_duration_s":0.5,"agreement_depth":2,"backend":"toy"}`
//! `{"type":"chunk","session":"s1","index":1,"payload":"<base64>"}` or `..."tokens":["hola"]}`
//! `{"type":"close","session":"s1"}`
//!
//! Every client envelope gets exactly one reply line, except `close`, which
//! is answered by the final commit and, for non-empty sessions, a metrics
//! envelope.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::chunk::{Chunk, ChunkPayload};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientEnvelope {
    Open {
        session: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chunk_duration_s: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        agreement_depth: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        backend: Option<String>,
    },
    Chunk {
        session: String,
        index: u32,
        /// Base64 frame bytes.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tokens: Option<Vec<String>>,
    },
    Close {
        session: String,
    },
}

impl ClientEnvelope {
    pub fn session(&self) -> &str {
        match self {
            ClientEnvelope::Open { session, .. }
            | ClientEnvelope::Chunk { session, .. }
            | ClientEnvelope::Close { session } => session,
        }
    }

    /// Chunk envelope carrying `chunk`'s payload.
    pub fn chunk(session: impl Into<String>, chunk: &Chunk) -> Self {
        let (payload, tokens) = match &chunk.payload {
            ChunkPayload::Frames(b) => (Some(BASE64.encode(b)), None),
            ChunkPayload::Tokens(t) => (None, Some(t.clone())),
        };
        ClientEnvelope::Chunk {
            session: session.into(),
            index: chunk.index,
            payload,
            tokens,
        }
    }
}

/// Decodes the payload of a chunk envelope. Exactly one of `payload` and
/// `tokens` must be present.
pub fn chunk_payload(
    payload: Option<&str>,
    tokens: Option<&[String]>,
) -> Result<ChunkPayload, String> {
    match (payload, tokens) {
        (Some(b64), None) => BASE64
            .decode(b64)
            .map(ChunkPayload::Frames)
            .map_err(|e| format!("bad base64 payload: {e}")),
        (None, Some(t)) => Ok(ChunkPayload::Tokens(t.to_vec())),
        (Some(_), Some(_)) => Err("chunk has both `payload` and `tokens`".into()),
        (None, None) => Err("chunk has neither `payload` nor `tokens`".into()),
    }
}

/// Status attached to the final commit of a session that saw no chunks.
pub const STATUS_EMPTY_SESSION: &str = "empty_session";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerEnvelope {
    Opened {
        session: String,
        backend: String,
    },
    Commit {
        session: String,
        /// Newly committed tokens; often empty.
        tokens: Vec<String>,
        chunk_index: u32,
        #[serde(rename = "final")]
        is_final: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        status: Option<String>,
    },
    Metrics {
        session: String,
        chunks: u32,
        tokens: usize,
        /// Absent when nothing was committed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        latency_s: Option<f64>,
    },
    /// The session (if named) has been aborted.
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session: Option<String>,
        message: String,
    },
    /// A limit was hit; session state is unchanged.
    Rejected {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session: Option<String>,
        reason: String,
    },
}

impl ServerEnvelope {
    pub fn session(&self) -> Option<&str> {
        match self {
            ServerEnvelope::Opened { session, .. }
            | ServerEnvelope::Commit { session, .. }
            | ServerEnvelope::Metrics { session, .. } => Some(session),
            ServerEnvelope::Error { session, .. } | ServerEnvelope::Rejected { session, .. } => {
                session.as_deref()
            }
        }
    }

    pub fn is_final(&self) -> bool {
        matches!(self, ServerEnvelope::Commit { is_final: true, .. })
    }
}
