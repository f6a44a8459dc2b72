//! Aggregation of evaluation records into per-direction report rows.

use std::collections::{HashMap, HashSet};

use super::run::EvalRecord;
use super::HarnessError;
use crate::metrics::{
    bleu, delta_bleu, delta_latency, latency_seconds, pooled_latency_seconds, BleuConfig,
    LatencyLog, ReportRow, AVERAGE_LABEL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub label: String,
    pub bleu: BleuConfig,
    /// Pool all tokens of a direction instead of averaging per utterance.
    pub pooled_latency: bool,
    /// Weight the average row by utterance count.
    pub weighted_average: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            label: "system".into(),
            bleu: BleuConfig::default(),
            pooled_latency: false,
            weighted_average: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct DirectionScore {
    utterances: usize,
    bleu: f64,
    latency: Option<f64>,
}

fn score(records: &[&EvalRecord], opts: &ReportOptions) -> Result<DirectionScore, HarnessError> {
    let hyps: Vec<&str> = records.iter().map(|r| r.output.as_str()).collect();
    let refs: Vec<&str> = records.iter().map(|r| r.reference.as_str()).collect();
    let bleu = bleu(&hyps, &refs, &opts.bleu)?.score;
    let logs = records
        .iter()
        .map(|r| r.latency_log())
        .collect::<Result<Vec<LatencyLog>, _>>()?;
    let latency = if opts.pooled_latency {
        pooled_latency_seconds(&logs).ok()
    } else {
        // Utterances with no output have no latency and are skipped.
        let per: Vec<f64> = logs
            .iter()
            .filter_map(|l| latency_seconds(l).ok())
            .collect();
        (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
    };
    Ok(DirectionScore {
        utterances: records.len(),
        bleu,
        latency,
    })
}

fn group<'a>(records: &[&'a EvalRecord]) -> Vec<(String, Vec<&'a EvalRecord>)> {
    let mut order: Vec<(String, Vec<&EvalRecord>)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for r in records {
        let slot = *index.entry(r.direction.as_str()).or_insert_with(|| {
            order.push((r.direction.clone(), Vec::new()));
            order.len() - 1
        });
        order[slot].1.push(r);
    }
    order
}

fn fill_deltas(
    row: &mut ReportRow,
    sys: &DirectionScore,
    base: &DirectionScore,
) -> Result<(), HarnessError> {
    row.baseline_bleu = Some(base.bleu);
    let d = delta_bleu(sys.bleu, base.bleu)?;
    row.delta_bleu = Some(d.absolute);
    row.bleu_loss_pct = d.percent;
    row.baseline_latency_s = base.latency;
    if let (Some(s), Some(b)) = (sys.latency, base.latency) {
        if b > 0.0 {
            let d = delta_latency(s, b)?;
            row.delta_latency_s = Some(d.absolute);
            row.latency_gain_pct = d.percent;
        }
    }
    Ok(())
}

fn mean(values: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut sum, mut weight) = (0.0, 0.0);
    for (v, w) in values {
        sum += v * w;
        weight += w;
    }
    (weight > 0.0).then(|| sum / weight)
}

fn average(scores: &[DirectionScore], weighted: bool) -> DirectionScore {
    let w = |s: &DirectionScore| if weighted { s.utterances as f64 } else { 1.0 };
    let latencies: Vec<&DirectionScore> = scores.iter().filter(|s| s.latency.is_some()).collect();
    DirectionScore {
        utterances: scores.iter().map(|s| s.utterances).sum(),
        bleu: mean(scores.iter().map(|s| (s.bleu, w(s)))).unwrap_or(0.0),
        latency: mean(latencies.iter().map(|s| (s.latency.unwrap(), w(s)))),
    }
}

/// One row per direction in first-appearance order, then an average row.
///
/// Records that failed on either side are dropped from both sides so the two
/// systems are scored on the same utterances. The average row holds the mean
/// of the per-direction BLEU and latency; its deltas are computed from those
/// means.
pub fn build_report(
    system: &[EvalRecord],
    baseline: Option<&[EvalRecord]>,
    opts: &ReportOptions,
) -> Result<Vec<ReportRow>, HarnessError> {
    let mut excluded: HashSet<&str> = system
        .iter()
        .filter(|r| !r.is_ok())
        .map(|r| r.id.as_str())
        .collect();
    let mut base_by_id: HashMap<&str, &EvalRecord> = HashMap::new();
    if let Some(base) = baseline {
        for r in base {
            if base_by_id.insert(r.id.as_str(), r).is_some() {
                return Err(HarnessError::Pairing(format!(
                    "baseline has duplicate id `{}`",
                    r.id
                )));
            }
            if !r.is_ok() {
                excluded.insert(r.id.as_str());
            }
        }
        let sys_ids: HashSet<&str> = system.iter().map(|r| r.id.as_str()).collect();
        if let Some(id) = system
            .iter()
            .map(|r| r.id.as_str())
            .find(|id| !base_by_id.contains_key(id))
        {
            return Err(HarnessError::Pairing(format!(
                "`{id}` missing from baseline"
            )));
        }
        if let Some(id) = base
            .iter()
            .map(|r| r.id.as_str())
            .find(|id| !sys_ids.contains(id))
        {
            return Err(HarnessError::Pairing(format!("`{id}` missing from system")));
        }
        for r in system {
            let b = base_by_id[r.id.as_str()];
            if b.direction != r.direction {
                return Err(HarnessError::Pairing(format!(
                    "`{}` is {} in system but {} in baseline",
                    r.id, r.direction, b.direction
                )));
            }
        }
    }
    let kept: Vec<&EvalRecord> = system
        .iter()
        .filter(|r| !excluded.contains(r.id.as_str()))
        .collect();
    if kept.is_empty() {
        return Err(HarnessError::Pairing(
            "no successful records to report".into(),
        ));
    }

    let mut rows = Vec::new();
    let mut sys_scores = Vec::new();
    let mut base_scores = Vec::new();
    for (direction, recs) in group(&kept) {
        let sys = score(&recs, opts)?;
        let mut row = ReportRow {
            system: opts.label.clone(),
            direction,
            utterances: sys.utterances,
            bleu: sys.bleu,
            baseline_bleu: None,
            delta_bleu: None,
            bleu_loss_pct: None,
            latency_s: sys.latency,
            baseline_latency_s: None,
            delta_latency_s: None,
            latency_gain_pct: None,
        };
        if baseline.is_some() {
            let paired: Vec<&EvalRecord> = recs.iter().map(|r| base_by_id[r.id.as_str()]).collect();
            let base = score(&paired, opts)?;
            fill_deltas(&mut row, &sys, &base)?;
            base_scores.push(base);
        }
        sys_scores.push(sys);
        rows.push(row);
    }

    let sys = average(&sys_scores, opts.weighted_average);
    let mut avg = ReportRow {
        system: opts.label.clone(),
        direction: AVERAGE_LABEL.to_string(),
        utterances: sys.utterances,
        bleu: sys.bleu,
        baseline_bleu: None,
        delta_bleu: None,
        bleu_loss_pct: None,
        latency_s: sys.latency,
        baseline_latency_s: None,
        delta_latency_s: None,
        latency_gain_pct: None,
    };
    if baseline.is_some() {
        fill_deltas(
            &mut avg,
            &sys,
            &average(&base_scores, opts.weighted_average),
        )?;
    }
    rows.push(avg);
    Ok(rows)
}
