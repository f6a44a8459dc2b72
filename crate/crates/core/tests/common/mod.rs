#![allow(dead_code)]

use std::collections::BTreeMap;

use chunkstream::chunk::Chunk;
use chunkstream::decoder::{
    Capabilities, DecodeError, IncrementalDecoder, TailGuessMode, ToyDecoder, ToyTranslatorSpec,
};
use chunkstream::policy::{CommitEvent, SessionConfig, StreamSession};
use chunkstream::tokens::{TokenSequence, TokenizerTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VOCAB: usize = 16;

pub fn word_map() -> BTreeMap<String, String> {
    (0..VOCAB)
        .map(|i| (format!("s{i}"), format!("t{i}")))
        .collect()
}

/// Keeps every hypothesis the inner decoder returned.
pub struct Recording<D> {
    pub inner: D,
    pub hypotheses: Vec<TokenSequence>,
}

impl<D: IncrementalDecoder> IncrementalDecoder for Recording<D> {
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn decode(
        &mut self,
        input: &[Chunk],
        committed: &TokenSequence,
    ) -> Result<TokenSequence, DecodeError> {
        let h = self.inner.decode(input, committed)?;
        self.hypotheses.push(h.clone());
        Ok(h)
    }
}

#[derive(Debug, Clone)]
pub struct SessionCase {
    pub chunks: Vec<Vec<String>>,
    pub spec: ToyTranslatorSpec,
    pub depth: usize,
}

impl SessionCase {
    /// 1..=100 chunks of 0..=3 tokens, random or cycling tail guesses,
    /// horizon 0..=3, agreement depth 2..=4.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=100);
        let chunks = (0..n)
            .map(|_| {
                let k = rng.gen_range(0..=3);
                (0..k)
                    .map(|_| format!("s{}", rng.gen_range(0..VOCAB)))
                    .collect()
            })
            .collect();
        let mode = if rng.gen_bool(0.5) {
            TailGuessMode::Random
        } else {
            TailGuessMode::Cycling
        };
        SessionCase {
            chunks,
            spec: ToyTranslatorSpec::new(word_map()).with_tail(
                mode,
                rng.gen(),
                rng.gen_range(0..=3),
            ),
            depth: rng.gen_range(2..=4),
        }
    }

    pub fn input(&self, duration: f64) -> Vec<Chunk> {
        self.chunks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Chunk::new(
                    i as u32 + 1,
                    chunkstream::chunk::ChunkPayload::Tokens(t.clone()),
                    duration,
                )
            })
            .collect()
    }
}

/// Trace of one session: committed prefix after every chunk and the flush.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub committed_after: Vec<TokenSequence>,
    pub events: Vec<Option<CommitEvent>>,
    pub hypotheses: Vec<TokenSequence>,
    pub final_output: TokenSequence,
    pub flush: Option<CommitEvent>,
    pub commit_log: Vec<CommitEvent>,
}

pub fn run_case(case: &SessionCase) -> SessionTrace {
    let config = SessionConfig {
        chunk_duration_s: 0.5,
        agreement_depth: case.depth,
        tag: TokenizerTag::word(),
    };
    let mut session = StreamSession::new(config).unwrap();
    let mut dec = Recording {
        inner: ToyDecoder::new(case.spec.clone()),
        hypotheses: Vec::new(),
    };
    let mut committed_after = Vec::new();
    let mut events = Vec::new();
    for chunk in case.input(0.5) {
        events.push(session.ingest_chunk(chunk, &mut dec).unwrap());
        committed_after.push(session.committed().clone());
    }
    let flush = session.finish().unwrap();
    SessionTrace {
        committed_after,
        events,
        hypotheses: dec.hypotheses,
        final_output: session.committed().clone(),
        flush,
        commit_log: session.commit_log().to_vec(),
    }
}

/// Checks monotonicity, soundness, first-chunk silence and flush
/// completeness for one trace. Returns a description of the first failure.
pub fn check_trace(case: &SessionCase, t: &SessionTrace) -> Result<(), String> {
    let n = case.chunks.len();
    let empty = TokenSequence::empty(TokenizerTag::word());
    if t.events[0].is_some() {
        return Err("commit on the first chunk".into());
    }
    let mut prev = &empty;
    for k in 0..n {
        let now = &t.committed_after[k];
        if !now.starts_with(prev) {
            return Err(format!("chunk {}: `{now}` revises `{prev}`", k + 1));
        }
        if let Some(e) = &t.events[k] {
            if e.chunk_index as usize != k + 1 || e.tokens != now.tokens()[prev.len()..] {
                return Err(format!(
                    "chunk {}: event {e:?} does not match growth",
                    k + 1
                ));
            }
        } else if now.len() != prev.len() {
            return Err(format!("chunk {}: silent growth", k + 1));
        }
        // Newly committed tokens must be agreed on by the whole window.
        if now.len() > prev.len() {
            let lo = (k + 1).saturating_sub(case.depth);
            for h in &t.hypotheses[lo..=k] {
                if !h.starts_with(now) {
                    return Err(format!("chunk {}: `{now}` not a prefix of `{h}`", k + 1));
                }
            }
        }
        // Prefixes only grow, so checking the next hypothesis covers all later ones.
        if let Some(h) = t.hypotheses.get(k + 1) {
            if !h.starts_with(now) {
                return Err(format!(
                    "chunk {}: next hypothesis `{h}` drops `{now}`",
                    k + 1
                ));
            }
        }
        prev = now;
    }
    if &t.final_output != t.hypotheses.last().unwrap() {
        return Err("flush did not emit the last hypothesis".into());
    }
    let joined: Vec<String> = t.commit_log.iter().flat_map(|e| e.tokens.clone()).collect();
    if joined != t.final_output.tokens() {
        return Err("commit log does not concatenate to the output".into());
    }
    if t.commit_log
        .iter()
        .any(|e| e.chunk_index == 0 || e.chunk_index as usize > n)
    {
        return Err("commit index out of range".into());
    }
    Ok(())
}

/// Maps `f` over `0..n`, on rayon's pool when the `parallel` feature is on.
pub fn par_map<T: Send, F: Fn(u64) -> T + Sync + Send>(n: u64, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Brute-force commit chunk of every token of a tail-free toy run
/// (horizon `h`, depth 2): a token from chunk `c` is committed at
/// `min(c + h + 1, N)`; tokens from chunks after `N - h` never appear.
pub fn toy_commit_oracle(chunks: &[Vec<String>], h: usize) -> Vec<u32> {
    let n = chunks.len();
    let mut out = Vec::new();
    for (i, tokens) in chunks.iter().enumerate() {
        let c = i + 1;
        if c + h > n {
            break;
        }
        out.extend(std::iter::repeat_n((c + h + 1).min(n) as u32, tokens.len()));
    }
    out
}
