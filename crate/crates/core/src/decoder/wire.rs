//! Newline-delimited JSON messages for talking to an out-of-process decoder.
//!
//! Request:  `{"id": 1, "committed": [...], "input": {"kind": "frames"|"tokens", "payload": <base64 or token list>, "chunk_sizes": [...]}}`
//! Response: `{"id": 1, "hypothesis": [...]}` or `{"id": 1, "error": "..."}`
//!
//! `chunk_sizes` lists the byte (frames) or token count of each chunk so the
//! receiving side can rebuild chunk boundaries. When absent the whole payload
//! is one chunk.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::DecodeError;
use crate::chunk::{Chunk, ChunkPayload, InputKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRequest {
    pub id: u64,
    pub committed: Vec<String>,
    pub input: WireInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireInput {
    pub kind: InputKind,
    pub payload: WirePayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WirePayload {
    Base64(String),
    Tokens(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecodeResponse {
    Hypothesis { id: u64, hypothesis: Vec<String> },
    Error { id: u64, error: String },
}

impl DecodeResponse {
    pub fn id(&self) -> u64 {
        match self {
            DecodeResponse::Hypothesis { id, .. } | DecodeResponse::Error { id, .. } => *id,
        }
    }
}

/// Flattens `chunks` into one wire payload. All chunks must share a kind;
/// an empty input is sent as an empty token list.
pub fn encode_input(chunks: &[Chunk]) -> Result<WireInput, DecodeError> {
    let kind = chunks
        .first()
        .map_or(InputKind::Tokens, |c| c.payload.kind());
    let sizes = chunks.iter().map(|c| c.payload.len()).collect();
    let payload = match kind {
        InputKind::Frames => {
            let mut bytes = Vec::new();
            for c in chunks {
                match &c.payload {
                    ChunkPayload::Frames(b) => bytes.extend_from_slice(b),
                    ChunkPayload::Tokens(_) => return Err(mixed()),
                }
            }
            WirePayload::Base64(BASE64.encode(bytes))
        }
        InputKind::Tokens => {
            let mut tokens = Vec::new();
            for c in chunks {
                match &c.payload {
                    ChunkPayload::Tokens(t) => tokens.extend_from_slice(t),
                    ChunkPayload::Frames(_) => return Err(mixed()),
                }
            }
            WirePayload::Tokens(tokens)
        }
    };
    Ok(WireInput {
        kind,
        payload,
        chunk_sizes: Some(sizes),
    })
}

fn mixed() -> DecodeError {
    DecodeError::Protocol("chunks mix frame and token payloads".into())
}

/// Rebuilds chunks from a wire payload.
pub fn decode_input(input: &WireInput, duration_s: f64) -> Result<Vec<Chunk>, DecodeError> {
    match (&input.kind, &input.payload) {
        (InputKind::Frames, WirePayload::Base64(b64)) => {
            let bytes = BASE64
                .decode(b64)
                .map_err(|e| DecodeError::Protocol(format!("bad base64 payload: {e}")))?;
            let sizes = split_sizes(input.chunk_sizes.as_deref(), bytes.len())?;
            let mut offset = 0;
            Ok(sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let part = bytes[offset..offset + n].to_vec();
                    offset += n;
                    Chunk::new(i as u32 + 1, ChunkPayload::Frames(part), duration_s)
                })
                .collect())
        }
        (InputKind::Tokens, WirePayload::Tokens(tokens)) => {
            let sizes = split_sizes(input.chunk_sizes.as_deref(), tokens.len())?;
            let mut offset = 0;
            Ok(sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let part = tokens[offset..offset + n].to_vec();
                    offset += n;
                    Chunk::new(i as u32 + 1, ChunkPayload::Tokens(part), duration_s)
                })
                .collect())
        }
        // An empty token list is also how an empty frame input looks.
        (InputKind::Frames, WirePayload::Tokens(t)) if t.is_empty() => Ok(Vec::new()),
        (kind, _) => Err(DecodeError::Protocol(format!(
            "payload does not match input kind {kind:?}"
        ))),
    }
}

fn split_sizes(sizes: Option<&[usize]>, total: usize) -> Result<Vec<usize>, DecodeError> {
    match sizes {
        Some(s) => {
            let sum: usize = s.iter().sum();
            if sum != total {
                return Err(DecodeError::Protocol(format!(
                    "chunk sizes sum to {sum} but payload holds {total}"
                )));
            }
            Ok(s.to_vec())
        }
        None if total == 0 => Ok(Vec::new()),
        None => Ok(vec![total]),
    }
}
