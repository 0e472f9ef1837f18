//! Audio clips, WAV I/O and the signal-level analyses used by the
//! selection metrics.

mod denoise;
mod math;
mod pitch;
mod resample;
mod vad;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use denoise::{denoise_mmse, DenoiseConfig};
pub use pitch::{track_f0, F0Config};
pub use resample::resample;
pub use vad::{detect_speech, VadConfig};

/// Mono audio with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        AudioClip {
            samples,
            sample_rate_hz,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample index range covered by `[start_s, end_s)`, clamped to the clip.
    pub fn sample_range(&self, start_s: f64, end_s: f64) -> std::ops::Range<usize> {
        let rate = f64::from(self.sample_rate_hz);
        let len = self.samples.len();
        let lo = ((start_s * rate).round().max(0.0) as usize).min(len);
        let hi = ((end_s * rate).round().max(0.0) as usize).min(len);
        lo..hi.max(lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
}

/// Sorted, non-overlapping speech intervals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentList {
    pub segments: Vec<Segment>,
}

impl SegmentList {
    pub fn new(segments: Vec<Segment>) -> Self {
        SegmentList { segments }
    }

    pub fn whole(clip: &AudioClip) -> Self {
        SegmentList::new(vec![Segment {
            start_s: 0.0,
            end_s: clip.duration_s(),
        }])
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.segments.iter().any(|s| s.start_s <= t && t < s.end_s)
    }

    /// Checks ordering, positivity and that every interval lies within
    /// `[0, duration_s]`.
    pub fn is_valid_for(&self, duration_s: f64) -> bool {
        let mut prev_end = 0.0;
        for s in &self.segments {
            if !(s.start_s >= prev_end && s.end_s > s.start_s && s.end_s <= duration_s) {
                return false;
            }
            prev_end = s.end_s;
        }
        true
    }
}

/// Per-frame fundamental frequency; unvoiced frames hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub hop_s: f64,
    pub values_hz: Vec<f64>,
    pub voicing: Vec<bool>,
}

impl F0Track {
    pub fn voiced_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values_hz
            .iter()
            .zip(&self.voicing)
            .filter(|(_, &v)| v)
            .map(|(&f, _)| f)
    }
}

/// Reads a PCM or float WAV file, averaging channels to mono.
///
/// Integer samples are scaled by `2^(bits-1)` so full-scale negative maps
/// to exactly -1.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let unsupported = |msg: String| Error::Audio {
        path: path.to_path_buf(),
        msg,
    };
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => unsupported(other.to_string()),
    })?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 || spec.sample_rate == 0 {
        return Err(unsupported("zero channels or sample rate".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = f64::from(1u32 << (bits - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| unsupported(e.to_string()))?
        }
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| unsupported(e.to_string()))?,
        (format, bits) => return Err(unsupported(format!("{bits}-bit {format:?} samples"))),
    };
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Ok(AudioClip::new(samples, spec.sample_rate))
}

/// Writes a 16-bit PCM mono WAV.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Audio {
            path: path.to_path_buf(),
            msg: other.to_string(),
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in &clip.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

/// Mean squared sample value over the union of `segments`; 0 when there is
/// no speech.
pub fn signal_power(clip: &AudioClip, segments: &SegmentList) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for seg in &segments.segments {
        for &s in &clip.samples[clip.sample_range(seg.start_s, seg.end_s)] {
            sum += s * s;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
