//! F0 tracking with the normalized autocorrelation.

use serde::{Deserialize, Serialize};

use super::{AudioClip, F0Track, SegmentList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct F0Config {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Minimum normalized autocorrelation peak for a voiced frame.
    pub voicing_threshold: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        F0Config {
            window_ms: 40.0,
            hop_ms: 10.0,
            f_min_hz: 60.0,
            f_max_hz: 400.0,
            voicing_threshold: 0.3,
        }
    }
}

/// Peaks within this fraction of the strongest one are preferred at the
/// shortest lag, which avoids locking onto sub-harmonics.
const OCTAVE_TOLERANCE: f64 = 0.9;

/// A frame with one half below this fraction of the other half's energy
/// straddles an onset or offset and is left unvoiced.
const TRANSITION_ENERGY_RATIO: f64 = 0.1;

/// Frames whose peak is below this fraction of the clip's peak are silent.
const SILENCE_RATIO: f64 = 0.03;

fn is_transition(frame: &[f64]) -> bool {
    let (a, b) = frame.split_at(frame.len() / 2);
    let ea: f64 = a.iter().map(|x| x * x).sum();
    let eb: f64 = b.iter().map(|x| x * x).sum();
    ea.min(eb) < TRANSITION_ENERGY_RATIO * ea.max(eb)
}

fn normalized_acf(frame: &[f64], lag: usize) -> f64 {
    let n = frame.len() - lag;
    let (head, tail) = (&frame[..n], &frame[lag..]);
    let cross: f64 = head.iter().zip(tail).map(|(a, b)| a * b).sum();
    let e0: f64 = head.iter().map(|a| a * a).sum();
    let e1: f64 = tail.iter().map(|b| b * b).sum();
    let denom = (e0 * e1).sqrt();
    if denom > 1e-12 {
        cross / denom
    } else {
        0.0
    }
}

/// Returns `(f0_hz, peak)` for one frame, or `None` when no lag in range
/// has a usable peak.
fn frame_pitch(frame: &[f64], rate: f64, min_lag: usize, max_lag: usize) -> Option<(f64, f64)> {
    let acf: Vec<f64> = (min_lag - 1..=max_lag + 1)
        .map(|lag| normalized_acf(frame, lag))
        .collect();
    // acf[i] holds lag min_lag - 1 + i
    let peaks: Vec<usize> = (1..acf.len() - 1)
        .filter(|&i| acf[i] > 0.0 && acf[i] >= acf[i - 1] && acf[i] >= acf[i + 1])
        .collect();
    let best = peaks
        .iter()
        .map(|&i| acf[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let &i = peaks.iter().find(|&&i| acf[i] >= OCTAVE_TOLERANCE * best)?;

    let (a, b, c) = (acf[i - 1], acf[i], acf[i + 1]);
    let curvature = a - 2.0 * b + c;
    let shift = if curvature.abs() > 1e-12 {
        (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let lag = (min_lag - 1 + i) as f64 + shift;
    Some((rate / lag, b))
}

/// Frame-wise F0 over the clip. Frames whose centre falls outside every
/// speech segment, that are near silent, or that span an onset or offset
/// are unvoiced.
pub fn track_f0(clip: &AudioClip, segments: &SegmentList, cfg: &F0Config) -> F0Track {
    let rate = f64::from(clip.sample_rate_hz);
    let window = ((cfg.window_ms * 1e-3 * rate).round() as usize).max(1);
    let hop = ((cfg.hop_ms * 1e-3 * rate).round() as usize).max(1);
    let min_lag = ((rate / cfg.f_max_hz).floor() as usize).max(2);
    let max_lag = (rate / cfg.f_min_hz).ceil() as usize;
    let hop_s = hop as f64 / rate;

    let len = clip.samples.len();
    let n_frames = if len >= window {
        1 + (len - window) / hop
    } else {
        0
    };
    let usable = max_lag + 2 < window;

    let mut values_hz = Vec::with_capacity(n_frames);
    let mut voicing = Vec::with_capacity(n_frames);
    let silence = SILENCE_RATIO * clip.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let mut frame = vec![0.0; window];
    for k in 0..n_frames {
        let start = k * hop;
        let centre_s = (start as f64 + window as f64 / 2.0) / rate;
        let mut f0 = 0.0;
        if usable && segments.contains(centre_s) {
            let raw = &clip.samples[start..start + window];
            let mean = raw.iter().sum::<f64>() / window as f64;
            frame.iter_mut().zip(raw).for_each(|(d, s)| *d = s - mean);
            let quiet = raw.iter().all(|s| s.abs() < silence);
            let pitch = if quiet || is_transition(&frame) {
                None
            } else {
                frame_pitch(&frame, rate, min_lag, max_lag)
            };
            if let Some((hz, peak)) = pitch {
                if peak >= cfg.voicing_threshold && (cfg.f_min_hz..=cfg.f_max_hz).contains(&hz) {
                    f0 = hz;
                }
            }
        }
        values_hz.push(f0);
        voicing.push(f0 > 0.0);
    }
    F0Track {
        hop_s,
        values_hz,
        voicing,
    }
}
