//! Chunk-index latency.
//!
//! A token's output time is the end of the chunk whose processing committed
//! it: `chunk_index * chunk_duration`. Latency is the mean output time over
//! all output tokens. The input-time term of the lag is never computed (it
//! needs word alignments and is constant when comparing two systems on the
//! same input), so only latency and latency differences are exposed.

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::policy::CommitEvent;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEmission {
    pub token: String,
    pub chunk_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyLog {
    pub emissions: Vec<TokenEmission>,
    pub chunk_duration_s: f64,
    pub total_chunks: u32,
}

impl LatencyLog {
    /// Expands a commit log into one record per token.
    pub fn from_commits(
        commits: &[CommitEvent],
        chunk_duration_s: f64,
        total_chunks: u32,
    ) -> Result<Self, MetricError> {
        if !(chunk_duration_s.is_finite() && chunk_duration_s > 0.0) {
            return Err(MetricError::InvalidArgument(format!(
                "chunk duration must be positive, got {chunk_duration_s}"
            )));
        }
        let mut emissions = Vec::new();
        for event in commits {
            if event.chunk_index == 0 || event.chunk_index > total_chunks {
                return Err(MetricError::ChunkIndexOutOfRange {
                    index: event.chunk_index,
                    total: total_chunks,
                });
            }
            emissions.extend(event.tokens.iter().map(|t| TokenEmission {
                token: t.clone(),
                chunk_index: event.chunk_index,
            }));
        }
        Ok(LatencyLog {
            emissions,
            chunk_duration_s,
            total_chunks,
        })
    }

    pub fn len(&self) -> usize {
        self.emissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    fn index_sum(&self) -> u64 {
        self.emissions.iter().map(|e| e.chunk_index as u64).sum()
    }
}

/// Mean of `chunk_index * chunk_duration_s` over all emitted tokens.
pub fn latency_seconds(log: &LatencyLog) -> Result<f64, MetricError> {
    if log.is_empty() {
        return Err(MetricError::EmptyLog);
    }
    Ok(log.index_sum() as f64 * log.chunk_duration_s / log.len() as f64)
}

/// Latency with every token of every log pooled together.
pub fn pooled_latency_seconds<'a, I>(logs: I) -> Result<f64, MetricError>
where
    I: IntoIterator<Item = &'a LatencyLog>,
{
    let (mut weighted, mut count) = (0.0, 0usize);
    for log in logs {
        weighted += log.index_sum() as f64 * log.chunk_duration_s;
        count += log.len();
    }
    if count == 0 {
        return Err(MetricError::EmptyLog);
    }
    Ok(weighted / count as f64)
}

/// Absolute and relative difference of a system against a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    /// `baseline - system`.
    pub absolute: f64,
    /// `100 * (baseline - system) / baseline`; `None` when undefined.
    pub percent: Option<f64>,
}

/// Latency reduction of `system` relative to `baseline` (positive = faster).
pub fn delta_latency(system: f64, baseline: f64) -> Result<Delta, MetricError> {
    if !(baseline.is_finite() && baseline > 0.0) {
        return Err(MetricError::InvalidArgument(format!(
            "baseline latency must be positive, got {baseline}"
        )));
    }
    if !system.is_finite() {
        return Err(MetricError::InvalidArgument(format!(
            "system latency must be finite, got {system}"
        )));
    }
    let absolute = baseline - system;
    Ok(Delta {
        absolute,
        percent: Some(100.0 * absolute / baseline),
    })
}

/// BLEU loss of `system` relative to `baseline` (positive = worse).
pub fn delta_bleu(system: f64, baseline: f64) -> Result<Delta, MetricError> {
    for (name, v) in [("system", system), ("baseline", baseline)] {
        if !(0.0..=100.0).contains(&v) {
            return Err(MetricError::InvalidArgument(format!(
                "{name} BLEU must lie in [0, 100], got {v}"
            )));
        }
    }
    let absolute = baseline - system;
    Ok(Delta {
        absolute,
        percent: (baseline != 0.0).then(|| 100.0 * absolute / baseline),
    })
}
