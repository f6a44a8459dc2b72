//! Synthetic word-for-word translator with an unstable tail.
//!
//! A source token that arrived in chunk `c` is translated through the word
//! map once at least `stability_horizon` further chunks have been seen.
//! Younger tokens are either dropped or replaced by a guess, which makes the
//! hypothesis tail flicker between calls the way a real model's does when it
//! lacks right context.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Capabilities, DecodeError, IncrementalDecoder};
use crate::chunk::{Chunk, ChunkPayload, InputKind};
use crate::tokens::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailGuessMode {
    /// Unstable tokens produce no output.
    #[default]
    Off,
    /// Guesses walk the target vocabulary deterministically.
    Cycling,
    /// Guesses are drawn from a seeded RNG.
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyTranslatorSpec {
    pub word_map: BTreeMap<String, String>,
    #[serde(default)]
    pub tail_guess: TailGuessMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stability_horizon: u32,
}

impl ToyTranslatorSpec {
    pub fn new(word_map: BTreeMap<String, String>) -> Self {
        ToyTranslatorSpec {
            word_map,
            tail_guess: TailGuessMode::Off,
            seed: 0,
            stability_horizon: 0,
        }
    }

    pub fn with_tail(mut self, mode: TailGuessMode, seed: u64, horizon: u32) -> Self {
        self.tail_guess = mode;
        self.seed = seed;
        self.stability_horizon = horizon;
        self
    }

    /// Sorted distinct target words; guesses are drawn from here.
    pub fn target_vocab(&self) -> Vec<&str> {
        self.word_map
            .values()
            .map(String::as_str)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Guess for the source token at `position` (0-based) after `chunks_seen` chunks.
    ///
    /// Cycling picks `vocab[(position + chunks_seen) % |vocab|]`. Random seeds
    /// ChaCha8 with `seed ^ (position << 32) ^ chunks_seen` (after a
    /// splitmix64 finalizer) and draws one index uniformly.
    pub fn guess(&self, position: usize, chunks_seen: usize) -> Option<String> {
        self.guess_from(&self.target_vocab(), position, chunks_seen)
    }

    fn guess_from(&self, vocab: &[&str], position: usize, chunks_seen: usize) -> Option<String> {
        if vocab.is_empty() {
            return None;
        }
        let idx = match self.tail_guess {
            TailGuessMode::Off => return None,
            TailGuessMode::Cycling => (position + chunks_seen) % vocab.len(),
            TailGuessMode::Random => {
                let key = self.seed ^ ((position as u64) << 32) ^ chunks_seen as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(key));
                rng.gen_range(0..vocab.len())
            }
        };
        Some(vocab[idx].to_string())
    }

    /// Raw output for `input` with no forced prefix.
    pub fn translate(&self, input: &[Chunk]) -> Result<Vec<String>, DecodeError> {
        let chunks_seen = input.len();
        let mut out = Vec::new();
        let mut position = 0usize;
        let mut unstable = false;
        let vocab = match self.tail_guess {
            TailGuessMode::Off => Vec::new(),
            _ => self.target_vocab(),
        };
        for chunk in input {
            let ChunkPayload::Tokens(tokens) = &chunk.payload else {
                return Err(DecodeError::UnsupportedInput(InputKind::Frames));
            };
            let age = chunks_seen.saturating_sub(chunk.index as usize);
            let stable = age >= self.stability_horizon as usize;
            for tok in tokens {
                let mapped = self
                    .word_map
                    .get(tok)
                    .ok_or_else(|| DecodeError::Vocabulary(tok.clone()))?;
                if stable && !unstable {
                    out.push(mapped.clone());
                } else {
                    unstable = true;
                    if let Some(g) = self.guess_from(&vocab, position, chunks_seen) {
                        out.push(g);
                    }
                }
                position += 1;
            }
        }
        Ok(out)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Forced decoder over a [`ToyTranslatorSpec`]: the committed prefix is kept
/// and the raw translation supplies everything after it.
#[derive(Debug, Clone)]
pub struct ToyDecoder {
    spec: ToyTranslatorSpec,
}

impl ToyDecoder {
    pub fn new(spec: ToyTranslatorSpec) -> Self {
        ToyDecoder { spec }
    }

    pub fn spec(&self) -> &ToyTranslatorSpec {
        &self.spec
    }
}

impl IncrementalDecoder for ToyDecoder {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            accepts_frames: false,
            accepts_tokens: true,
            deterministic: true,
            concurrent: false,
        }
    }

    fn decode(
        &mut self,
        input: &[Chunk],
        committed: &TokenSequence,
    ) -> Result<TokenSequence, DecodeError> {
        let raw = self.spec.translate(input)?;
        let mut out = committed.clone();
        out.extend_from_slice(&raw[committed.len().min(raw.len())..]);
        Ok(out)
    }
}
