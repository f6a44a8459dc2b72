use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::chunk::{Chunk, DEFAULT_CHUNK_SECONDS};
use crate::decoder::{ScriptStep, ToyTranslatorSpec, DEFAULT_REMOTE_TIMEOUT};
use crate::policy::{SessionConfig, DEFAULT_AGREEMENT_DEPTH};
use crate::tokens::TokenizerTag;

fn default_chunk() -> f64 {
    DEFAULT_CHUNK_SECONDS
}

fn default_depth() -> usize {
    DEFAULT_AGREEMENT_DEPTH
}

fn one() -> usize {
    1
}

/// Input of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UtteranceInput {
    /// Scripted hypotheses, one per chunk; chunk payloads are empty.
    Script { script: Vec<ScriptStep> },
    /// Source tokens grouped `tokens_per_chunk` at a time.
    Tokens {
        tokens: Vec<String>,
        #[serde(default = "one")]
        tokens_per_chunk: usize,
    },
    /// Raw frame bytes read from a file (relative paths resolve against the manifest).
    Frames {
        frames: PathBuf,
        bytes_per_chunk: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub direction: String,
    pub reference: String,
    pub input: UtteranceInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalManifest {
    #[serde(default = "default_chunk")]
    pub chunk_duration_s: f64,
    #[serde(default = "default_depth")]
    pub agreement_depth: usize,
    #[serde(default)]
    pub tokenizer: TokenizerTag,
    /// Backend used when none is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToyTranslatorSpec>,
    pub utterances: Vec<Utterance>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl EvalManifest {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Manifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Manifest(format!("{}: {e}", path.display())))?;
        let mut m = Self::from_json(&text)?;
        m.base_dir = path.parent().map(Path::to_path_buf);
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            chunk_duration_s: self.chunk_duration_s,
            agreement_depth: self.agreement_depth,
            tag: self.tokenizer.clone(),
        }
    }

    /// Run-level checks. Problems with a single utterance's input are left
    /// to evaluation time, where they become error records.
    pub fn validate(&self, backend: &BackendSpec) -> Result<(), HarnessError> {
        self.session_config()
            .validate()
            .map_err(|e| HarnessError::Manifest(e.to_string()))?;
        let mut seen = HashSet::new();
        for u in &self.utterances {
            if !seen.insert(u.id.as_str()) {
                return Err(HarnessError::Manifest(format!(
                    "duplicate utterance id `{}`",
                    u.id
                )));
            }
        }
        if matches!(backend, BackendSpec::Toy) && self.toy.is_none() {
            return Err(HarnessError::Manifest(
                "toy backend selected but manifest has no `toy` section".into(),
            ));
        }
        Ok(())
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Cuts an utterance's input into chunks.
    pub fn chunks_for(&self, utt: &Utterance) -> Result<Vec<Chunk>, String> {
        let dur = self.chunk_duration_s;
        let chunks = match &utt.input {
            UtteranceInput::Script { script } => Chunk::placeholders(script.len(), dur),
            UtteranceInput::Tokens {
                tokens,
                tokens_per_chunk,
            } => Chunk::split_tokens(tokens, *tokens_per_chunk, dur),
            UtteranceInput::Frames {
                frames,
                bytes_per_chunk,
            } => {
                let path = self.resolve(frames);
                let bytes = std::fs::read(&path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                Chunk::split_frames(&bytes, *bytes_per_chunk, dur)
            }
        };
        if chunks.is_empty() {
            return Err("utterance has no input".into());
        }
        Ok(chunks)
    }
}

/// Which decoder drives the evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Scripted,
    Toy,
    Remote { endpoint: String, timeout: Duration },
}

impl FromStr for BackendSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(BackendSpec::Scripted),
            "toy" => Ok(BackendSpec::Toy),
            _ => match s.strip_prefix("remote:") {
                Some(endpoint) if !endpoint.is_empty() => Ok(BackendSpec::Remote {
                    endpoint: endpoint.to_string(),
                    timeout: DEFAULT_REMOTE_TIMEOUT,
                }),
                _ => Err(HarnessError::Manifest(format!(
                    "unknown backend `{s}` (expected scripted, toy or remote:<addr>)"
                ))),
            },
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Scripted => f.write_str("scripted"),
            BackendSpec::Toy => f.write_str("toy"),
            BackendSpec::Remote { endpoint, .. } => write!(f, "remote:{endpoint}"),
        }
    }
}
