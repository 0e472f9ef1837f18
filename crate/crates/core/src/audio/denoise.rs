//! Short-time spectral amplitude MMSE noise suppression.
//!
//! Ephraim-Malah gain with decision-directed a-priori SNR. The noise power
//! spectrum starts from the leading frames of the clip and is tracked
//! through frames a likelihood-ratio test classifies as noise only.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::math::{bessel_i0e, bessel_i1e};
use super::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Decision-directed smoothing of the a-priori SNR.
    pub alpha: f64,
    pub gain_floor_db: f64,
    /// Leading frames averaged into the initial noise estimate.
    pub noise_init_frames: usize,
    /// Recursive smoothing applied when updating the noise estimate.
    pub noise_smoothing: f64,
    /// Mean log-likelihood ratio below which a frame counts as noise.
    pub speech_llr_threshold: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            frame_ms: 25.0,
            hop_ms: 10.0,
            alpha: 0.98,
            gain_floor_db: -25.0,
            noise_init_frames: 6,
            noise_smoothing: 0.98,
            speech_llr_threshold: 0.15,
        }
    }
}

const MIN_FRAMES: usize = 10;
const POWER_FLOOR: f64 = 1e-12;
const MAX_POSTERIOR_SNR: f64 = 1e4;

/// MMSE short-time spectral amplitude gain for a-priori SNR `xi` and
/// a-posteriori SNR `gamma`.
pub(crate) fn stsa_gain(xi: f64, gamma: f64) -> f64 {
    let v = xi / (1.0 + xi) * gamma;
    let half = 0.5 * v;
    // exp(-v/2) is folded into the scaled Bessel functions.
    let g = (std::f64::consts::PI.sqrt() / 2.0)
        * (v.sqrt() / gamma)
        * ((1.0 + v) * bessel_i0e(half) + v * bessel_i1e(half));
    if g.is_finite() {
        g
    } else {
        xi / (1.0 + xi)
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

fn samples_for(ms: f64, rate: u32) -> usize {
    ((ms * 1e-3 * f64::from(rate)).round() as usize).max(1)
}

/// Suppresses stationary background noise. The output has the same length
/// and sample rate as the input.
pub fn denoise_mmse(clip: &AudioClip, cfg: &DenoiseConfig) -> Result<AudioClip> {
    let frame = samples_for(cfg.frame_ms, clip.sample_rate_hz);
    let hop = samples_for(cfg.hop_ms, clip.sample_rate_hz).min(frame);
    let len = clip.samples.len();
    if len < frame + (MIN_FRAMES - 1) * hop {
        return Err(Error::InvalidInput(format!(
            "clip of {len} samples is shorter than {MIN_FRAMES} analysis frames"
        )));
    }
    let fft_len = frame.next_power_of_two();
    let bins = fft_len / 2 + 1;
    let window = hann(frame);
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];

    let spectrum = |samples: &[f64], buf: &mut Vec<Complex<f64>>| {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, (&s, &w)) in samples.iter().zip(&window).enumerate() {
            buf[i] = Complex::new(s * w, 0.0);
        }
        forward.process(buf);
    };

    let init_frames = cfg.noise_init_frames.max(1);
    let mut noise = vec![0.0; bins];
    for k in 0..init_frames {
        let start = k * hop;
        spectrum(&clip.samples[start..start + frame], &mut buf);
        for (n, c) in noise.iter_mut().zip(&buf) {
            *n += c.norm_sqr() / init_frames as f64;
        }
    }

    // Pad so every input sample is covered by at least two frames.
    let pad = frame - hop;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(&clip.samples);
    let n_frames = (len + pad).div_ceil(hop);
    padded.resize((n_frames - 1) * hop + frame, 0.0);

    let floor = 10f64.powf(cfg.gain_floor_db / 20.0);
    let xi_min = floor * floor;
    let mut out = vec![0.0; padded.len()];
    let mut norm = vec![0.0; padded.len()];
    let mut prev_amp2 = vec![0.0; bins];
    let mut gains = vec![0.0; bins];
    let mut first = true;

    for k in 0..n_frames {
        let start = k * hop;
        spectrum(&padded[start..start + frame], &mut buf);

        let mut llr = 0.0;
        for b in 0..bins {
            let lambda = noise[b].max(POWER_FLOOR);
            let power = buf[b].norm_sqr();
            let gamma = (power / lambda).min(MAX_POSTERIOR_SNR);
            let ml = (gamma - 1.0).max(0.0);
            let xi = if first {
                cfg.alpha + (1.0 - cfg.alpha) * ml
            } else {
                cfg.alpha * prev_amp2[b] / lambda + (1.0 - cfg.alpha) * ml
            }
            .max(xi_min);
            llr += gamma * xi / (1.0 + xi) - (1.0 + xi).ln();
            gains[b] = if gamma > 0.0 {
                stsa_gain(xi, gamma).clamp(floor, 1.0)
            } else {
                floor
            };
            prev_amp2[b] = gains[b] * gains[b] * power;
        }
        first = false;

        if llr / (bins as f64) < cfg.speech_llr_threshold {
            let mu = cfg.noise_smoothing;
            for (n, c) in noise.iter_mut().zip(&buf) {
                *n = mu * *n + (1.0 - mu) * c.norm_sqr();
            }
        }

        for b in 0..bins {
            buf[b] *= gains[b];
            if b > 0 && b < fft_len - b {
                buf[fft_len - b] = buf[b].conj();
            }
        }
        inverse.process(&mut buf);
        for i in 0..frame {
            out[start + i] += buf[i].re / fft_len as f64;
            norm[start + i] += window[i];
        }
    }

    let samples = out[pad..pad + len]
        .iter()
        .zip(&norm[pad..pad + len])
        .map(|(&o, &w)| if w > 1e-9 { o / w } else { 0.0 })
        .collect();
    Ok(AudioClip::new(samples, clip.sample_rate_hz))
}
