//! Report rows and their TSV / JSON Lines encodings.
//!
//! TSV column order (fixed):
//! `system direction utterances bleu baseline_bleu delta_bleu bleu_loss_pct
//!  latency_s baseline_latency_s delta_latency_s latency_gain_pct`.
//! Numbers are printed with two decimals; absent values print as `-`.

use serde::{Deserialize, Serialize};

/// Direction label of the row that averages all directions.
pub const AVERAGE_LABEL: &str = "Avg.";

pub const TSV_COLUMNS: [&str; 11] = [
    "system",
    "direction",
    "utterances",
    "bleu",
    "baseline_bleu",
    "delta_bleu",
    "bleu_loss_pct",
    "latency_s",
    "baseline_latency_s",
    "delta_latency_s",
    "latency_gain_pct",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub system: String,
    pub direction: String,
    pub utterances: usize,
    pub bleu: f64,
    pub baseline_bleu: Option<f64>,
    /// `baseline - system`
    pub delta_bleu: Option<f64>,
    pub bleu_loss_pct: Option<f64>,
    pub latency_s: Option<f64>,
    pub baseline_latency_s: Option<f64>,
    /// `baseline - system`
    pub delta_latency_s: Option<f64>,
    pub latency_gain_pct: Option<f64>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl ReportRow {
    pub fn rounded(&self) -> ReportRow {
        let r = |x: Option<f64>| x.map(round2);
        ReportRow {
            system: self.system.clone(),
            direction: self.direction.clone(),
            utterances: self.utterances,
            bleu: round2(self.bleu),
            baseline_bleu: r(self.baseline_bleu),
            delta_bleu: r(self.delta_bleu),
            bleu_loss_pct: r(self.bleu_loss_pct),
            latency_s: r(self.latency_s),
            baseline_latency_s: r(self.baseline_latency_s),
            delta_latency_s: r(self.delta_latency_s),
            latency_gain_pct: r(self.latency_gain_pct),
        }
    }

    fn tsv_line(&self) -> String {
        [
            self.system.clone(),
            self.direction.clone(),
            self.utterances.to_string(),
            cell(Some(self.bleu)),
            cell(self.baseline_bleu),
            cell(self.delta_bleu),
            cell(self.bleu_loss_pct),
            cell(self.latency_s),
            cell(self.baseline_latency_s),
            cell(self.delta_latency_s),
            cell(self.latency_gain_pct),
        ]
        .join("\t")
    }
}

pub fn to_tsv(rows: &[ReportRow]) -> String {
    let mut out = TSV_COLUMNS.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.tsv_line());
        out.push('\n');
    }
    out
}

/// One JSON object per line, values rounded to two decimals.
pub fn to_json_lines(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(&row.rounded()).expect("row serializes"));
        out.push('\n');
    }
    out
}
