//! Partial-input training mix.
//!
//! Every full example is paired with one partial copy whose target keeps a
//! random leading fraction of its tokens (drawn uniformly from a ratio
//! range, 10%-40% by default). The source is cut to the same fraction of
//! its frames or tokens. The output is a seeded shuffle of full and partial
//! examples in exactly equal numbers.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PARTIAL_SUFFIX: &str = "#partial";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("ratio {ratio} outside [{lo}, {hi}]")]
    RatioOutOfRange { ratio: f64, lo: f64, hi: f64 },
    #[error("invalid ratio range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("example `{0}` is not a full example")]
    NotFull(String),
    #[error("example `{0}` has an empty target")]
    EmptyTarget(String),
    #[error("duplicate example id `{0}`")]
    DuplicateId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where an example's input comes from. Frame payloads are referenced, never embedded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceRef {
    Frames { frames: String, count: u64 },
    Tokens { tokens: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    #[default]
    Full,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusExample {
    pub id: String,
    pub source: SourceRef,
    pub target: Vec<String>,
    #[serde(default)]
    pub kind: ExampleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

impl CorpusExample {
    /// The id shared by a full example and its partial copy.
    pub fn id_stem(&self) -> &str {
        self.id.strip_suffix(PARTIAL_SUFFIX).unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for RatioRange {
    fn default() -> Self {
        RatioRange { lo: 0.10, hi: 0.40 }
    }
}

impl RatioRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self, CorpusError> {
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi && hi <= 1.0) {
            return Err(CorpusError::InvalidRange { lo, hi });
        }
        Ok(RatioRange { lo, hi })
    }

    pub fn contains(&self, ratio: f64) -> bool {
        (self.lo..=self.hi).contains(&ratio)
    }
}

/// `max(1, floor(ratio * len))`, or 0 for an empty input. The small epsilon
/// keeps products like 0.3 * 10 from flooring to 2.
fn truncated_len(len: u64, ratio: f64) -> u64 {
    if len == 0 {
        return 0;
    }
    (((ratio * len as f64) + 1e-9).floor() as u64).clamp(1, len)
}

/// Partial copy of a full example keeping the leading `ratio` of target and source.
pub fn make_partial(
    example: &CorpusExample,
    ratio: f64,
    range: RatioRange,
) -> Result<CorpusExample, CorpusError> {
    if example.kind != ExampleKind::Full {
        return Err(CorpusError::NotFull(example.id.clone()));
    }
    if example.target.is_empty() {
        return Err(CorpusError::EmptyTarget(example.id.clone()));
    }
    if !range.contains(ratio) {
        return Err(CorpusError::RatioOutOfRange {
            ratio,
            lo: range.lo,
            hi: range.hi,
        });
    }
    let keep = truncated_len(example.target.len() as u64, ratio) as usize;
    let source = match &example.source {
        SourceRef::Frames { frames, count } => SourceRef::Frames {
            frames: frames.clone(),
            count: truncated_len(*count, ratio),
        },
        SourceRef::Tokens { tokens } => SourceRef::Tokens {
            tokens: tokens[..truncated_len(tokens.len() as u64, ratio) as usize].to_vec(),
        },
    };
    Ok(CorpusExample {
        id: format!("{}{PARTIAL_SUFFIX}", example.id),
        source,
        target: example.target[..keep].to_vec(),
        kind: ExampleKind::Partial,
        ratio: Some(ratio),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixStats {
    pub full: usize,
    pub partial: usize,
    pub ratio_histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixManifest {
    pub seed: u64,
    pub range: RatioRange,
    pub examples: Vec<CorpusExample>,
    pub stats: MixStats,
}

const HISTOGRAM_BINS: usize = 10;

fn histogram(ratios: &[f64], range: RatioRange) -> Vec<HistogramBin> {
    let width = (range.hi - range.lo) / HISTOGRAM_BINS as f64;
    let mut bins: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|i| HistogramBin {
            lo: range.lo + i as f64 * width,
            hi: range.lo + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &r in ratios {
        let i = if width > 0.0 {
            (((r - range.lo) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        bins[i].count += 1;
    }
    bins
}

/// Emits each full example plus one partial copy, shuffled, all from one seeded RNG.
pub fn build_mix(
    corpus: &[CorpusExample],
    seed: u64,
    range: RatioRange,
) -> Result<MixManifest, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut ids = HashSet::with_capacity(corpus.len() * 2);
    for ex in corpus {
        if ex.kind != ExampleKind::Full {
            return Err(CorpusError::NotFull(ex.id.clone()));
        }
        if !ids.insert(ex.id.as_str()) {
            return Err(CorpusError::DuplicateId(ex.id.clone()));
        }
    }
    // A full id could collide with another example's partial id.
    for ex in corpus {
        let partial_id = format!("{}{PARTIAL_SUFFIX}", ex.id);
        if ids.contains(partial_id.as_str()) {
            return Err(CorpusError::DuplicateId(partial_id));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(corpus.len() * 2);
    let mut ratios = Vec::with_capacity(corpus.len());
    for ex in corpus {
        let ratio = rng.gen_range(range.lo..=range.hi);
        ratios.push(ratio);
        let partial = make_partial(ex, ratio, range)?;
        examples.push(ex.clone());
        examples.push(partial);
    }
    examples.shuffle(&mut rng);

    Ok(MixManifest {
        seed,
        range,
        stats: MixStats {
            full: corpus.len(),
            partial: corpus.len(),
            ratio_histogram: histogram(&ratios, range),
        },
        examples,
    })
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<CorpusExample>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: CorpusExample = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(ex);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut writer: W, examples: &[CorpusExample]) -> Result<(), CorpusError> {
    for ex in examples {
        serde_json::to_writer(&mut writer, ex).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
