//! Utterance selection: a WER filter followed by per-metric rejection of
//! the worst-scoring fraction of the surviving utterances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{RejectReason, UtteranceRecord};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Utterances with WER strictly above this are dropped.
    pub max_wer: f64,
    /// Fraction of the post-filter population rejected per metric.
    pub reject_fraction: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            max_wer: 0.10,
            reject_fraction: 0.05,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_wer.is_nan() || self.max_wer < 0.0 {
            return Err(Error::Config(format!(
                "max_wer must be >= 0, got {}",
                self.max_wer
            )));
        }
        if !(0.0..1.0).contains(&self.reject_fraction) {
            return Err(Error::Config(format!(
                "reject_fraction must lie in [0, 1), got {}",
                self.reject_fraction
            )));
        }
        Ok(())
    }
}

/// A ranked metric. Every ranked metric is worse when larger.
#[derive(Debug, Clone, Copy)]
pub struct RankedMetric {
    pub reason: RejectReason,
    pub value: fn(&MetricReport) -> f64,
}

pub const RANKED_METRICS: [RankedMetric; 4] = [
    RankedMetric {
        reason: RejectReason::Articulation,
        value: |m| m.articulation,
    },
    RankedMetric {
        reason: RejectReason::StdSylDur,
        value: |m| m.std_syl_dur_s,
    },
    RankedMetric {
        reason: RejectReason::NonFluency,
        value: |m| m.non_fluency,
    },
    RankedMetric {
        reason: RejectReason::StdF0,
        value: |m| m.std_f0_hz,
    },
];

fn metrics_of(rec: &UtteranceRecord) -> Result<&MetricReport> {
    rec.metrics
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("utterance `{}` has no metrics", rec.id)))
}

pub fn apply_wer_filter(records: &mut [UtteranceRecord], cfg: &SelectionConfig) -> Result<()> {
    for rec in records.iter() {
        metrics_of(rec)?;
    }
    for rec in records.iter_mut() {
        let wer = rec.metrics.as_ref().map(|m| m.wer).unwrap_or_default();
        if wer > cfg.max_wer {
            rec.verdict.reject(RejectReason::WerFilter);
        }
    }
    Ok(())
}

/// Number of utterances rejected per metric out of `n_kept`.
pub fn rejected_per_metric(n_kept: usize, fraction: f64) -> usize {
    (fraction * n_kept as f64).floor() as usize
}

/// For each ranked metric, rejects the `floor(fraction * N)` currently kept
/// utterances with the largest values. Ties go against the larger id. All
/// metrics rank the same population, so an utterance may collect several
/// reasons.
pub fn apply_percentile_rejection(
    records: &mut [UtteranceRecord],
    cfg: &SelectionConfig,
) -> Result<()> {
    let pool: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].verdict.kept())
        .collect();
    for &i in &pool {
        metrics_of(&records[i])?;
    }
    let quota = rejected_per_metric(pool.len(), cfg.reject_fraction);
    if quota == 0 {
        return Ok(());
    }
    let mut rejections: Vec<(usize, RejectReason)> = Vec::new();
    for metric in RANKED_METRICS {
        let mut ranked: Vec<(f64, &str, usize)> = pool
            .iter()
            .map(|&i| {
                let m = records[i].metrics.as_ref().expect("checked above");
                ((metric.value)(m), records[i].id.as_str(), i)
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| b.1.cmp(a.1)));
        rejections.extend(
            ranked
                .iter()
                .take(quota)
                .map(|&(_, _, i)| (i, metric.reason)),
        );
    }
    for (i, reason) in rejections {
        records[i].verdict.reject(reason);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub total: usize,
    pub kept: usize,
    pub rejected: usize,
    /// Utterances carrying each reason; a record with two reasons counts
    /// under both.
    pub by_reason: BTreeMap<String, usize>,
}

pub fn selection_summary(records: &[UtteranceRecord]) -> SelectionSummary {
    let mut by_reason: BTreeMap<String, usize> = RejectReason::ALL
        .iter()
        .map(|r| (r.as_str().to_string(), 0))
        .collect();
    let mut kept = 0;
    for rec in records {
        if rec.verdict.kept() {
            kept += 1;
        }
        for reason in &rec.verdict.reasons {
            *by_reason.entry(reason.as_str().to_string()).or_default() += 1;
        }
    }
    SelectionSummary {
        total: records.len(),
        kept,
        rejected: records.len() - kept,
        by_reason,
    }
}
