//! Quality and latency metrics. All functions are pure.

use thiserror::Error;

pub mod bleu;
pub mod latency;
pub mod report;
pub mod tokenize;

pub use bleu::{bleu, BleuConfig, BleuScore, BleuStats, Smoothing, Tokenization};
pub use latency::{
    delta_bleu, delta_latency, latency_seconds, pooled_latency_seconds, Delta, LatencyLog,
    TokenEmission,
};
pub use report::{to_json_lines, to_tsv, ReportRow, AVERAGE_LABEL};
pub use tokenize::tokenize_13a;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("latency is undefined for an empty output")]
    EmptyLog,
    #[error("chunk index {index} outside 1..={total}")]
    ChunkIndexOutOfRange { index: u32, total: u32 },
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
