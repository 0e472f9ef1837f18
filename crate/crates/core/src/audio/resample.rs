//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc kernel.

use super::math::bessel_i0;
use super::AudioClip;

/// Zero crossings of the sinc kernel on each side of its centre.
const ZERO_CROSSINGS: f64 = 32.0;
const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.94;
/// Above this many phases the kernel is evaluated on the fly.
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

struct Kernel {
    /// Cutoff relative to the input Nyquist frequency.
    cutoff: f64,
    /// Half width in input samples.
    half_width: f64,
    /// Taps per output sample.
    taps: usize,
}

impl Kernel {
    fn new(src: u64, dst: u64) -> Self {
        let cutoff = ROLLOFF * (dst as f64 / src as f64).min(1.0);
        let half_width = ZERO_CROSSINGS / cutoff;
        let taps = 2 * half_width.ceil() as usize;
        Kernel {
            cutoff,
            half_width,
            taps,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let r = t / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let x = std::f64::consts::PI * self.cutoff * t;
        let sinc = if x.abs() < 1e-12 { 1.0 } else { x.sin() / x };
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / bessel_i0(KAISER_BETA);
        self.cutoff * sinc * window
    }

    /// Coefficients for an output instant `frac` input samples after
    /// input index `base`; tap `j` multiplies input `base + 1 - taps/2 + j`.
    fn phase(&self, frac: f64) -> Vec<f64> {
        let half = (self.taps / 2) as f64;
        let mut coefs: Vec<f64> = (0..self.taps)
            .map(|j| self.eval(half - 1.0 - j as f64 + frac))
            .collect();
        let sum: f64 = coefs.iter().sum();
        if sum.abs() > 0.0 {
            coefs.iter_mut().for_each(|c| *c /= sum);
        }
        coefs
    }
}

/// Band-limited sample-rate conversion.
///
/// The output has `ceil(len * target / source)` samples, so its duration
/// matches the input to within one output sample period.
pub fn resample(clip: &AudioClip, target_hz: u32) -> AudioClip {
    assert!(target_hz > 0, "target sample rate must be positive");
    let src = u64::from(clip.sample_rate_hz);
    let dst = u64::from(target_hz);
    if src == dst || clip.samples.is_empty() {
        return AudioClip::new(clip.samples.clone(), target_hz);
    }
    let g = gcd(src, dst);
    let (up, down) = (dst / g, src / g);
    let kernel = Kernel::new(src, dst);
    let table: Option<Vec<Vec<f64>>> = (up <= MAX_TABLE_PHASES).then(|| {
        (0..up)
            .map(|p| kernel.phase(p as f64 / up as f64))
            .collect()
    });

    let input = &clip.samples;
    let len = input.len() as u64;
    let out_len = (len * up).div_ceil(down);
    let offset = kernel.taps as i64 / 2 - 1;
    let mut out = Vec::with_capacity(out_len as usize);
    for n in 0..out_len {
        let pos = n * down;
        let base = (pos / up) as i64;
        let phase = pos % up;
        let owned;
        let coefs: &[f64] = match &table {
            Some(t) => &t[phase as usize],
            None => {
                owned = kernel.phase(phase as f64 / up as f64);
                &owned
            }
        };
        let first = base - offset;
        let acc: f64 = coefs
            .iter()
            .enumerate()
            .filter_map(|(j, c)| {
                let k = first + j as i64;
                (k >= 0 && (k as u64) < len).then(|| c * input[k as usize])
            })
            .sum();
        out.push(acc);
    }
    AudioClip::new(out, target_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};
    use std::f64::consts::PI;

    fn tone(freq: f64, rate: u32, secs: f64) -> AudioClip {
        let n = (f64::from(rate) * secs) as usize;
        AudioClip::new(
            (0..n)
                .map(|i| 0.8 * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin())
                .collect(),
            rate,
        )
    }

    fn peak_bin(samples: &[f64]) -> (usize, usize) {
        let n = samples.len();
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let bin = (1..n / 2)
            .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
            .unwrap();
        (bin, n)
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn same_rate_is_identity() {
        let clip = tone(440.0, 16000, 0.1);
        assert_eq!(resample(&clip, 16000), clip);
    }

    #[test]
    fn downsampled_tone_keeps_its_peak() {
        let out = resample(&tone(1000.0, 48000, 1.0), 16000);
        assert_eq!(out.sample_rate_hz, 16000);
        assert_eq!(out.samples.len(), 16000);
        let (bin, n) = peak_bin(&out.samples);
        let expected = 1000.0 * n as f64 / 16000.0;
        assert!(
            (bin as f64 - expected).abs() <= 1.0,
            "bin {bin} vs {expected}"
        );
    }

    #[test]
    fn passband_energy_preserved() {
        let input = tone(440.0, 44100, 1.0);
        let out = resample(&input, 16000);
        // skip kernel edge effects
        let a = rms(&input.samples[4410..39690]);
        let b = rms(&out.samples[1600..14400]);
        assert!((a - b).abs() / a < 0.01, "{a} vs {b}");
    }

    #[test]
    fn duration_preserved_within_one_sample() {
        for &(src, dst, n) in &[
            (44100u32, 16000u32, 12345usize),
            (8000, 16000, 777),
            (22050, 16000, 1),
        ] {
            let clip = AudioClip::new(vec![0.1; n], src);
            let out = resample(&clip, dst);
            let diff = (out.duration_s() - clip.duration_s()).abs();
            assert!(diff <= 1.0 / f64::from(dst) + 1e-12, "{src}->{dst}: {diff}");
        }
    }

    #[test]
    fn content_above_new_nyquist_is_removed() {
        let out = resample(&tone(12000.0, 48000, 0.5), 16000);
        assert!(rms(&out.samples[800..7200]) < 1e-3);
    }

    #[test]
    fn upsampling_keeps_tone() {
        let out = resample(&tone(1000.0, 8000, 1.0), 16000);
        let (bin, n) = peak_bin(&out.samples);
        assert!((bin as f64 - 1000.0 * n as f64 / 16000.0).abs() <= 1.0);
    }
}
