use serde::{Deserialize, Serialize};

/// Default chunk length in seconds.
pub const DEFAULT_CHUNK_SECONDS: f64 = 0.5;

/// Opaque input carried by one chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkPayload {
    /// Raw audio frame bytes; never interpreted here.
    Frames(Vec<u8>),
    /// Source-language tokens (text input).
    Tokens(Vec<String>),
}

impl ChunkPayload {
    pub fn kind(&self) -> InputKind {
        match self {
            ChunkPayload::Frames(_) => InputKind::Frames,
            ChunkPayload::Tokens(_) => InputKind::Tokens,
        }
    }

    /// Payload size in bytes (frames) or tokens.
    pub fn len(&self) -> usize {
        match self {
            ChunkPayload::Frames(b) => b.len(),
            ChunkPayload::Tokens(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Frames,
    Tokens,
}

/// A fixed-duration slice of the input stream. `index` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub index: u32,
    pub payload: ChunkPayload,
    pub duration_s: f64,
}

impl Chunk {
    pub fn new(index: u32, payload: ChunkPayload, duration_s: f64) -> Self {
        Chunk {
            index,
            payload,
            duration_s,
        }
    }

    /// Splits `tokens` into chunks of `per_chunk` tokens each; the last chunk may be short.
    pub fn split_tokens(tokens: &[String], per_chunk: usize, duration_s: f64) -> Vec<Chunk> {
        let per_chunk = per_chunk.max(1);
        tokens
            .chunks(per_chunk)
            .enumerate()
            .map(|(i, c)| Chunk::new(i as u32 + 1, ChunkPayload::Tokens(c.to_vec()), duration_s))
            .collect()
    }

    /// Splits raw frame bytes into chunks of `per_chunk` bytes each.
    pub fn split_frames(bytes: &[u8], per_chunk: usize, duration_s: f64) -> Vec<Chunk> {
        let per_chunk = per_chunk.max(1);
        bytes
            .chunks(per_chunk)
            .enumerate()
            .map(|(i, c)| Chunk::new(i as u32 + 1, ChunkPayload::Frames(c.to_vec()), duration_s))
            .collect()
    }

    /// `count` chunks with empty frame payloads, for backends that only look at chunk counts.
    pub fn placeholders(count: usize, duration_s: f64) -> Vec<Chunk> {
        (1..=count as u32)
            .map(|i| Chunk::new(i, ChunkPayload::Frames(Vec::new()), duration_s))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_tokens_numbers_from_one() {
        let toks: Vec<String> = ["a", "b", "c", "d", "e"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let chunks = Chunk::split_tokens(&toks, 2, 0.5);
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks[0].index, 1);
        assert_eq!(chunks[2].payload, ChunkPayload::Tokens(vec!["e".into()]));
    }

    #[test]
    fn split_frames_sizes() {
        let chunks = Chunk::split_frames(&[0u8; 10], 4, 0.5);
        let sizes: Vec<usize> = chunks.iter().map(|c| c.payload.len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }
}
