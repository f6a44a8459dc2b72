use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::manifest::{BackendSpec, EvalManifest, Utterance, UtteranceInput};
use super::HarnessError;
use crate::decoder::{
    IncrementalDecoder, RemoteDecoder, ScriptTranscript, ScriptedDecoder, ToyDecoder,
};
use crate::metrics::{latency_seconds, LatencyLog, MetricError};
use crate::policy::{offline_decode, run_online, CommitEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Offline,
    Online,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Offline => "offline",
            Mode::Online => "online",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "offline" => Ok(Mode::Offline),
            "online" => Ok(Mode::Online),
            _ => Err(HarnessError::Manifest(format!("unknown mode `{s}`"))),
        }
    }
}

/// How utterances are spread over threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    /// Rayon thread pool; `0` uses the global pool. Falls back to sequential
    /// when the crate is built without the `parallel` feature.
    #[default]
    Auto,
    Threads(usize),
}

/// Outcome of one utterance in one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub direction: String,
    pub mode: Mode,
    pub output: String,
    pub reference: String,
    pub commit_log: Vec<CommitEvent>,
    pub total_chunks: u32,
    pub chunk_duration_s: f64,
    /// `None` for failed runs and empty outputs.
    pub latency_s: Option<f64>,
    /// Compute time; never part of the latency metric.
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalRecord {
    pub fn latency_log(&self) -> Result<LatencyLog, MetricError> {
        LatencyLog::from_commits(&self.commit_log, self.chunk_duration_s, self.total_chunks)
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn make_decoder(
    manifest: &EvalManifest,
    utt: &Utterance,
    backend: &BackendSpec,
) -> Result<Box<dyn IncrementalDecoder + Send>, String> {
    match backend {
        BackendSpec::Scripted => match &utt.input {
            UtteranceInput::Script { script } => {
                let transcript =
                    ScriptTranscript::from_steps(manifest.tokenizer.clone(), script.clone())
                        .map_err(|e| e.to_string())?;
                transcript
                    .check_forcing(manifest.agreement_depth)
                    .map_err(|e| format!("script cannot be forced: {e}"))?;
                Ok(Box::new(ScriptedDecoder::new(transcript)))
            }
            _ => Err("scripted backend needs a `script` input".into()),
        },
        BackendSpec::Toy => {
            let spec = manifest
                .toy
                .clone()
                .ok_or("manifest has no `toy` section")?;
            Ok(Box::new(ToyDecoder::new(spec)))
        }
        BackendSpec::Remote { endpoint, timeout } => {
            RemoteDecoder::connect(endpoint.clone(), *timeout)
                .map(|d| Box::new(d) as Box<_>)
                .map_err(|e| e.to_string())
        }
    }
}

/// Evaluates one utterance in one mode; failures become error records.
pub fn evaluate_utterance(
    manifest: &EvalManifest,
    utt: &Utterance,
    mode: Mode,
    backend: &BackendSpec,
) -> EvalRecord {
    let started = Instant::now();
    let mut record = EvalRecord {
        id: utt.id.clone(),
        direction: utt.direction.clone(),
        mode,
        output: String::new(),
        reference: utt.reference.clone(),
        commit_log: Vec::new(),
        total_chunks: 0,
        chunk_duration_s: manifest.chunk_duration_s,
        latency_s: None,
        wall_ms: 0.0,
        error: None,
    };
    let result = (|| -> Result<(), String> {
        let chunks = manifest.chunks_for(utt)?;
        record.total_chunks = chunks.len() as u32;
        let mut decoder = make_decoder(manifest, utt, backend)?;
        match mode {
            Mode::Online => {
                let outcome = run_online(chunks, &mut decoder, manifest.session_config())
                    .map_err(|e| e.to_string())?;
                record.output = outcome.output.join();
                record.commit_log = outcome.commit_log;
            }
            Mode::Offline => {
                let (output, event) =
                    offline_decode(&chunks, &mut decoder, manifest.tokenizer.clone())
                        .map_err(|e| e.to_string())?;
                record.output = output.join();
                record.commit_log = event.into_iter().collect();
            }
        }
        let log = record.latency_log().map_err(|e| e.to_string())?;
        record.latency_s = latency_seconds(&log).ok();
        Ok(())
    })();
    if let Err(e) = result {
        record.error = Some(e);
    }
    record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    record
}

/// Runs every utterance in every requested mode. Records come back in
/// manifest order, modes in the order given.
pub fn run_eval(
    manifest: &EvalManifest,
    modes: &[Mode],
    backend: &BackendSpec,
    parallelism: Parallelism,
) -> Result<Vec<EvalRecord>, HarnessError> {
    manifest.validate(backend)?;
    if let BackendSpec::Remote { endpoint, timeout } = backend {
        // Fail the whole run early if the backend is unreachable.
        RemoteDecoder::connect(endpoint.clone(), *timeout).map_err(HarnessError::Handshake)?;
    }
    let work = |utt: &Utterance| -> Vec<EvalRecord> {
        modes
            .iter()
            .map(|&mode| evaluate_utterance(manifest, utt, mode, backend))
            .collect()
    };
    let nested = map_utterances(&manifest.utterances, parallelism, work)?;
    Ok(nested.into_iter().flatten().collect())
}

#[cfg(feature = "parallel")]
fn map_utterances<F>(
    utterances: &[Utterance],
    parallelism: Parallelism,
    work: F,
) -> Result<Vec<Vec<EvalRecord>>, HarnessError>
where
    F: Fn(&Utterance) -> Vec<EvalRecord> + Sync + Send,
{
    use rayon::prelude::*;
    match parallelism {
        Parallelism::Sequential => Ok(utterances.iter().map(work).collect()),
        Parallelism::Auto | Parallelism::Threads(0) => {
            Ok(utterances.par_iter().map(work).collect())
        }
        Parallelism::Threads(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Manifest(format!("thread pool: {e}")))?;
            Ok(pool.install(|| utterances.par_iter().map(work).collect()))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn map_utterances<F>(
    utterances: &[Utterance],
    _parallelism: Parallelism,
    work: F,
) -> Result<Vec<Vec<EvalRecord>>, HarnessError>
where
    F: Fn(&Utterance) -> Vec<EvalRecord>,
{
    Ok(utterances.iter().map(work).collect())
}
