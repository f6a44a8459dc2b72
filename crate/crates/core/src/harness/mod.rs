//! Evaluation harness: manifests in, per-utterance records and report rows out.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::decoder::DecodeError;
use crate::metrics::MetricError;

pub mod manifest;
pub mod report;
pub mod run;
pub mod synth;

pub use manifest::{BackendSpec, EvalManifest, Utterance, UtteranceInput};
pub use report::{build_report, ReportOptions};
pub use run::{evaluate_utterance, run_eval, EvalRecord, Mode, Parallelism};
pub use synth::synthetic_toy_manifest;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("backend handshake failed: {0}")]
    Handshake(DecodeError),
    #[error("pairing: {0}")]
    Pairing(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("records line {line}: {message}")]
    Records { line: usize, message: String },
}

pub fn write_records<W: Write>(mut out: W, records: &[EvalRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_records<R: std::io::Read>(input: R) -> Result<Vec<EvalRecord>, HarnessError> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|e| HarnessError::Records {
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(records)
}

pub fn load_records(path: &Path) -> Result<Vec<EvalRecord>, HarnessError> {
    read_records(std::fs::File::open(path)?)
}
