//! A backend that replays a fixed transcript of full hypotheses, one per chunk count.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{check_extends, Capabilities, DecodeError, IncrementalDecoder};
use crate::chunk::Chunk;
use crate::tokens::{longest_common_prefix_all, TokenSequence, TokenizerTag};

/// Full hypotheses for chunk counts 1..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptTranscript {
    steps: Vec<TokenSequence>,
    tag: TokenizerTag,
}

/// One transcript entry: a whitespace-separated string or an explicit token list.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ScriptStep {
    Text(String),
    Tokens(Vec<String>),
}

#[derive(Deserialize, Serialize)]
struct TranscriptRepr {
    #[serde(default)]
    tag: TokenizerTag,
    steps: Vec<ScriptStep>,
}

impl ScriptTranscript {
    pub fn new(steps: Vec<TokenSequence>, tag: TokenizerTag) -> Result<Self, DecodeError> {
        if steps.is_empty() {
            return Err(DecodeError::Protocol("transcript has no steps".into()));
        }
        for step in &steps {
            if step.tag() != &tag {
                return Err(crate::tokens::TokenError::TagMismatch {
                    left: tag.to_string(),
                    right: step.tag().to_string(),
                }
                .into());
            }
        }
        Ok(ScriptTranscript { steps, tag })
    }

    /// Parses `{"tag": "...", "steps": [...]}`. Each step is either a
    /// whitespace-separated string or an explicit token list.
    pub fn from_json(text: &str) -> Result<Self, DecodeError> {
        let repr: TranscriptRepr =
            serde_json::from_str(text).map_err(|e| DecodeError::Protocol(e.to_string()))?;
        Self::from_steps(repr.tag, repr.steps)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, DecodeError> {
        let repr: TranscriptRepr =
            serde_json::from_value(value).map_err(|e| DecodeError::Protocol(e.to_string()))?;
        Self::from_steps(repr.tag, repr.steps)
    }

    pub fn from_steps(tag: TokenizerTag, steps: Vec<ScriptStep>) -> Result<Self, DecodeError> {
        let steps = steps
            .into_iter()
            .map(|s| match s {
                ScriptStep::Text(t) => TokenSequence::new(t.split_whitespace(), tag.clone()),
                ScriptStep::Tokens(t) => TokenSequence::new(t, tag.clone()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(steps, tag)
    }

    pub fn to_json(&self) -> String {
        let repr = TranscriptRepr {
            tag: self.tag.clone(),
            steps: self
                .steps
                .iter()
                .map(|s| ScriptStep::Tokens(s.tokens().to_vec()))
                .collect(),
        };
        serde_json::to_string(&repr).expect("transcript serializes")
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn tag(&self) -> &TokenizerTag {
        &self.tag
    }

    pub fn step(&self, chunks_seen: usize) -> Option<&TokenSequence> {
        chunks_seen.checked_sub(1).and_then(|i| self.steps.get(i))
    }

    /// Replays the agreement rule at `depth` over the transcript and checks
    /// that every step extends the prefix that would be forced on it.
    pub fn check_forcing(&self, depth: usize) -> Result<(), DecodeError> {
        let depth = depth.max(2);
        let mut committed = TokenSequence::empty(self.tag.clone());
        let mut window: VecDeque<&TokenSequence> = VecDeque::new();
        for step in &self.steps {
            check_extends(&committed, step)?;
            if window.len() == depth {
                window.pop_front();
            }
            window.push_back(step);
            if window.len() == depth {
                let agreed =
                    longest_common_prefix_all(window.iter().copied())?.expect("non-empty window");
                if agreed.len() > committed.len() {
                    committed = agreed;
                }
            }
        }
        Ok(())
    }

    /// Committed output implied at each step under depth-2 agreement (the
    /// "agreement" column of a chunk-by-chunk trace).
    pub fn agreement_column(&self) -> Vec<TokenSequence> {
        let mut out = Vec::with_capacity(self.steps.len());
        let mut committed = TokenSequence::empty(self.tag.clone());
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                let lcp = longest_common_prefix_all([&self.steps[i - 1], step])
                    .ok()
                    .flatten()
                    .unwrap_or_else(|| committed.clone());
                if lcp.len() > committed.len() {
                    committed = lcp;
                }
            }
            out.push(committed.clone());
        }
        out
    }
}

/// The four-chunk "Nature can tell us" fixture: each entry is the full
/// hypothesis after forcing the agreed prefix.
pub fn nature_transcript() -> ScriptTranscript {
    ScriptTranscript::new(
        [
            "Nature canned",
            "Nature can not",
            "Nature can tell a",
            "Nature can tell us",
        ]
        .iter()
        .map(|s| TokenSequence::from_words(s))
        .collect(),
        TokenizerTag::word(),
    )
    .expect("fixture is well formed")
}

#[derive(Debug, Clone)]
pub struct ScriptedDecoder {
    transcript: ScriptTranscript,
}

impl ScriptedDecoder {
    pub fn new(transcript: ScriptTranscript) -> Self {
        ScriptedDecoder { transcript }
    }

    pub fn transcript(&self) -> &ScriptTranscript {
        &self.transcript
    }

    /// Scripted hypothesis after `chunks_seen` chunks, checked against `committed`.
    pub fn decode_count(
        &self,
        chunks_seen: usize,
        committed: &TokenSequence,
    ) -> Result<TokenSequence, DecodeError> {
        let hyp = self
            .transcript
            .step(chunks_seen)
            .ok_or(DecodeError::ScriptExhausted {
                requested: chunks_seen,
                available: self.transcript.len(),
            })?;
        check_extends(committed, hyp)?;
        Ok(hyp.clone())
    }
}

impl IncrementalDecoder for ScriptedDecoder {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            accepts_frames: true,
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
        self.decode_count(input.len(), committed)
    }
}
