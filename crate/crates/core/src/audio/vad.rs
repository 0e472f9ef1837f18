//! Energy-based voice activity detection.
//!
//! A frame is active when its log energy exceeds an adaptive noise floor
//! (a low percentile of all frame energies in the clip) by a fixed margin.
//! Pauses no longer than the hangover are bridged, and speech runs shorter
//! than the minimum duration are dropped.

use serde::{Deserialize, Serialize};

use super::{AudioClip, Segment, SegmentList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VadConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Margin above the noise floor, dB.
    pub threshold_db: f64,
    /// Percentile of frame energies taken as the noise floor.
    pub floor_percentile: f64,
    /// Frames below this absolute level (dBFS) are never speech.
    pub min_level_db: f64,
    pub min_speech_ms: f64,
    pub hangover_ms: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        VadConfig {
            frame_ms: 25.0,
            hop_ms: 10.0,
            threshold_db: 6.0,
            floor_percentile: 10.0,
            min_level_db: -70.0,
            min_speech_ms: 100.0,
            hangover_ms: 200.0,
        }
    }
}

fn frame_energies_db(clip: &AudioClip, frame: usize, hop: usize) -> Vec<f64> {
    let len = clip.samples.len();
    (0..len.div_ceil(hop))
        .map(|k| {
            let chunk = &clip.samples[k * hop..(k * hop + frame).min(len)];
            let ms = chunk.iter().map(|s| s * s).sum::<f64>() / chunk.len() as f64;
            10.0 * (ms + 1e-10).log10()
        })
        .collect()
}

fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Speech segments of `clip`. A silent clip yields an empty list.
pub fn detect_speech(clip: &AudioClip, cfg: &VadConfig) -> SegmentList {
    if clip.is_empty() {
        return SegmentList::default();
    }
    let rate = f64::from(clip.sample_rate_hz);
    let frame = ((cfg.frame_ms * 1e-3 * rate).round() as usize).max(1);
    let hop = ((cfg.hop_ms * 1e-3 * rate).round() as usize).clamp(1, frame);
    let hop_s = hop as f64 / rate;

    let energies = frame_energies_db(clip, frame, hop);
    let threshold =
        (percentile(&energies, cfg.floor_percentile) + cfg.threshold_db).max(cfg.min_level_db);
    let active: Vec<bool> = energies.iter().map(|&e| e > threshold).collect();

    // Active runs as inclusive frame ranges.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (k, &a) in active.iter().enumerate() {
        if !a {
            continue;
        }
        match runs.last_mut() {
            Some((_, end)) if *end + 1 == k => *end = k,
            _ => runs.push((k, k)),
        }
    }

    let hangover = (cfg.hangover_ms * 1e-3 / hop_s).round() as usize;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some((_, end)) if run.0 - *end - 1 <= hangover => *end = run.1,
            _ => merged.push(run),
        }
    }

    let min_frames = (cfg.min_speech_ms * 1e-3 / hop_s).round() as usize;
    let duration = clip.duration_s();
    // Frame k is credited with the hop-wide slice around its centre.
    let centre = frame as f64 / rate / 2.0;
    let segments = merged
        .into_iter()
        .filter(|&(a, b)| b - a + 1 >= min_frames)
        .map(|(a, b)| Segment {
            start_s: (a as f64 * hop_s + centre - hop_s / 2.0).clamp(0.0, duration),
            end_s: (b as f64 * hop_s + centre + hop_s / 2.0).clamp(0.0, duration),
        })
        .filter(|s| s.end_s > s.start_s)
        .collect();
    SegmentList::new(segments)
}
