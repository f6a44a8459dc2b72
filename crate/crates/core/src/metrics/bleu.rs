//! Corpus-level BLEU with the `nrefs:1|case:mixed|tok:13a|smooth:exp` configuration.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize_13a;
use super::MetricError;

pub const MAX_NGRAM_ORDER: usize = 4;

/// log(0) stand-in used when a precision is zero, so the score collapses to ~0.
const LOG_ZERO: f64 = -9_999_999_999.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Zero-match orders get precision 100 / (2^k * total) for the k-th such order.
    Exp,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenization {
    Thirteen,
    /// Split on whitespace only.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_order: usize,
    pub smoothing: Smoothing,
    pub lowercase: bool,
    pub tokenization: Tokenization,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_order: MAX_NGRAM_ORDER,
            smoothing: Smoothing::Exp,
            lowercase: false,
            tokenization: Tokenization::Thirteen,
        }
    }
}

impl BleuConfig {
    pub fn signature(&self) -> String {
        format!(
            "nrefs:1|case:{}|eff:no|tok:{}|smooth:{}",
            if self.lowercase { "lc" } else { "mixed" },
            match self.tokenization {
                Tokenization::Thirteen => "13a",
                Tokenization::None => "none",
            },
            match self.smoothing {
                Smoothing::Exp => "exp",
                Smoothing::None => "none",
            }
        )
    }

    fn preprocess(&self, segment: &str) -> String {
        let segment = if self.lowercase {
            segment.to_lowercase()
        } else {
            segment.to_string()
        };
        let segment = segment.trim_end();
        match self.tokenization {
            Tokenization::Thirteen => tokenize_13a(segment),
            Tokenization::None => segment.to_string(),
        }
    }
}

/// Sufficient statistics; corpus stats are the element-wise sum over segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub sys_len: u64,
    pub ref_len: u64,
    pub correct: Vec<u64>,
    pub total: Vec<u64>,
}

impl BleuStats {
    fn zero(order: usize) -> Self {
        BleuStats {
            sys_len: 0,
            ref_len: 0,
            correct: vec![0; order],
            total: vec![0; order],
        }
    }

    fn add(&mut self, other: &BleuStats) {
        self.sys_len += other.sys_len;
        self.ref_len += other.ref_len;
        for (a, b) in self.correct.iter_mut().zip(&other.correct) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub score: f64,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub stats: BleuStats,
}

fn ngram_counts(tokens: &[&str], max_order: usize) -> HashMap<Vec<String>, u64> {
    let mut counts = HashMap::new();
    for n in 1..=max_order {
        for gram in tokens.windows(n) {
            let key: Vec<String> = gram.iter().map(|t| t.to_string()).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Statistics for one already-preprocessed hypothesis/reference pair.
fn segment_stats(hyp: &str, reference: &str, max_order: usize) -> BleuStats {
    let hyp_tokens: Vec<&str> = hyp.split_whitespace().collect();
    let ref_tokens: Vec<&str> = reference.split_whitespace().collect();
    let ref_counts = ngram_counts(&ref_tokens, max_order);
    let mut stats = BleuStats::zero(max_order);
    stats.sys_len = hyp_tokens.len() as u64;
    stats.ref_len = ref_tokens.len() as u64;
    for (gram, count) in ngram_counts(&hyp_tokens, max_order) {
        let n = gram.len() - 1;
        stats.total[n] += count;
        if let Some(&r) = ref_counts.get(&gram) {
            stats.correct[n] += count.min(r);
        }
    }
    stats
}

/// Sums sentence statistics over the corpus.
pub fn corpus_stats<H, R>(
    hypotheses: &[H],
    references: &[R],
    config: &BleuConfig,
) -> Result<BleuStats, MetricError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if config.max_order == 0 {
        return Err(MetricError::InvalidArgument(
            "max n-gram order must be positive".into(),
        ));
    }
    let mut stats = BleuStats::zero(config.max_order);
    for (h, r) in hypotheses.iter().zip(references) {
        let hyp = config.preprocess(h.as_ref());
        let reference = config.preprocess(r.as_ref());
        stats.add(&segment_stats(&hyp, &reference, config.max_order));
    }
    Ok(stats)
}

/// Final score from aggregated statistics.
pub fn score_from_stats(stats: &BleuStats, config: &BleuConfig) -> BleuScore {
    let order = config.max_order;
    let brevity_penalty = if stats.sys_len < stats.ref_len {
        if stats.sys_len > 0 {
            (1.0 - stats.ref_len as f64 / stats.sys_len as f64).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    let mut precisions = vec![0.0; order];
    if stats.correct.iter().all(|&c| c == 0) {
        return BleuScore {
            score: 0.0,
            precisions,
            brevity_penalty,
            stats: stats.clone(),
        };
    }
    let mut smooth = 1.0;
    for (n, precision) in precisions.iter_mut().enumerate() {
        if stats.total[n] == 0 {
            // Higher orders stay at zero precision.
            break;
        }
        *precision = if stats.correct[n] == 0 {
            match config.smoothing {
                Smoothing::Exp => {
                    smooth *= 2.0;
                    100.0 / (smooth * stats.total[n] as f64)
                }
                Smoothing::None => 0.0,
            }
        } else {
            100.0 * stats.correct[n] as f64 / stats.total[n] as f64
        };
    }
    let log_sum: f64 = precisions
        .iter()
        .map(|&p| if p == 0.0 { LOG_ZERO } else { p.ln() })
        .sum();
    BleuScore {
        // exp(ln 100) can land a hair above 100.
        score: (brevity_penalty * (log_sum / order as f64).exp()).min(100.0),
        precisions,
        brevity_penalty,
        stats: stats.clone(),
    }
}

/// Corpus BLEU in [0, 100], one reference per hypothesis.
pub fn bleu<H, R>(
    hypotheses: &[H],
    references: &[R],
    config: &BleuConfig,
) -> Result<BleuScore, MetricError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    let stats = corpus_stats(hypotheses, references, config)?;
    Ok(score_from_stats(&stats, config))
}
