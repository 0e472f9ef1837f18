//! Per-utterance selection metrics.
//!
//! * articulation = P_signal x mean syllable duration, with P_signal the
//!   linear mean-square amplitude over speech segments;
//! * non-fluency = longest internal pause / mean syllable duration;
//! * standard deviations of syllable duration and of F0.
//!
//! All standard deviations are population (divide-by-N) figures.

use serde::{Deserialize, Serialize};

use crate::alignment::SilenceSpan;
use crate::audio::{signal_power, AudioClip, F0Track, SegmentList};
use crate::corpus::{TimedToken, UtteranceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub wer: f64,
    pub articulation: f64,
    pub std_syl_dur_s: f64,
    pub non_fluency: f64,
    pub std_f0_hz: f64,
    pub avg_syl_dur_s: f64,
    pub p_signal: f64,
    pub max_internal_silence_s: f64,
}

pub const CSV_HEADER: &str =
    "id,wer,articulation,std_syl_dur,non_fluency,std_f0,avg_syl_dur,p_signal,max_internal_silence";

impl MetricReport {
    /// One metric CSV row (without trailing newline).
    pub fn csv_row(&self, id: &str) -> String {
        format!(
            "{id},{},{},{},{},{},{},{},{}",
            self.wer,
            self.articulation,
            self.std_syl_dur_s,
            self.non_fluency,
            self.std_f0_hz,
            self.avg_syl_dur_s,
            self.p_signal,
            self.max_internal_silence_s
        )
    }
}

fn require_positive_duration(avg_syl_dur_s: f64) -> Result<()> {
    if avg_syl_dur_s > 0.0 && avg_syl_dur_s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "average syllable duration must be positive, got {avg_syl_dur_s}"
        )))
    }
}

pub fn articulation(p_signal: f64, avg_syl_dur_s: f64) -> Result<f64> {
    require_positive_duration(avg_syl_dur_s)?;
    if p_signal < 0.0 {
        return Err(Error::InvalidInput(format!(
            "negative signal power {p_signal}"
        )));
    }
    Ok(p_signal * avg_syl_dur_s)
}

fn max_silence(silences: &[SilenceSpan]) -> f64 {
    silences.iter().map(|s| s.duration_s).fold(0.0, f64::max)
}

pub fn non_fluency(silences: &[SilenceSpan], avg_syl_dur_s: f64) -> Result<f64> {
    require_positive_duration(avg_syl_dur_s)?;
    Ok(max_silence(silences) / avg_syl_dur_s)
}

/// Welford accumulator for mean and population variance.
#[derive(Debug, Default, Clone, Copy)]
struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn population_std(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0).sqrt()
        }
    }
}

/// Mean and population std of durations over aligned, non-marker tokens.
pub fn syllable_duration_stats(tokens: &[TimedToken]) -> Result<(f64, f64)> {
    let mut stats = RunningStats::default();
    for t in tokens.iter().filter(|t| t.aligned && !t.syllable.is_marker) {
        stats.push(t.duration());
    }
    if stats.count == 0 {
        return Err(Error::InvalidInput("no aligned syllables".into()));
    }
    Ok((stats.mean, stats.population_std()))
}

/// Population std over voiced frames; 0 with fewer than two of them.
pub fn std_f0(track: &F0Track) -> f64 {
    let mut stats = RunningStats::default();
    track.voiced_values().for_each(|f| stats.push(f));
    if stats.count < 2 {
        0.0
    } else {
        stats.population_std()
    }
}

/// Computes every metric for one aligned utterance. `clip` is the audio the
/// power is measured on; `segments` are its speech segments.
pub fn build_report(
    record: &UtteranceRecord,
    clip: &AudioClip,
    segments: &SegmentList,
    track: &F0Track,
) -> Result<MetricReport> {
    let tag = |e: Error| e.for_utterance(&record.id);
    let wer = record
        .alignment
        .as_ref()
        .map(|a| a.wer)
        .ok_or_else(|| tag(Error::InvalidInput("utterance has not been aligned".into())))?;
    let (avg, std) = syllable_duration_stats(&record.timed_tokens).map_err(tag)?;
    let p_signal = signal_power(clip, segments);
    Ok(MetricReport {
        wer,
        articulation: articulation(p_signal, avg).map_err(tag)?,
        std_syl_dur_s: std,
        non_fluency: non_fluency(&record.silences, avg).map_err(tag)?,
        std_f0_hz: std_f0(track),
        avg_syl_dur_s: avg,
        p_signal,
        max_internal_silence_s: max_silence(&record.silences),
    })
}
