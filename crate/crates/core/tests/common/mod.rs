//! Synthetic corpus: voiced syllables separated by known pauses, with a CTM
//! whose timings match the audio exactly.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use foundcorpus::audio::{write_wav, AudioClip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RATE: u32 = 16000;
pub const LEAD_S: f64 = 0.3;
pub const TAIL_S: f64 = 0.3;

pub struct FixtureUtt {
    pub id: String,
    /// Transcript as it appears in the manifest.
    pub raw_text: String,
    /// Normalized syllables, which is what the CTM contains.
    pub syllables: Vec<String>,
    pub durations_s: Vec<f64>,
    /// Pause after each syllable but the last.
    pub gaps_s: Vec<f64>,
    pub f0_hz: f64,
}

impl FixtureUtt {
    /// Start and end of each syllable, on a millisecond grid.
    pub fn timings(&self) -> Vec<(f64, f64)> {
        let mut t_ms = (LEAD_S * 1000.0).round() as i64;
        let mut out = Vec::new();
        for (i, d) in self.durations_s.iter().enumerate() {
            let d_ms = (d * 1000.0).round() as i64;
            out.push((t_ms as f64 / 1000.0, (t_ms + d_ms) as f64 / 1000.0));
            t_ms += d_ms;
            if let Some(g) = self.gaps_s.get(i) {
                t_ms += (g * 1000.0).round() as i64;
            }
        }
        out
    }

    pub fn duration_s(&self) -> f64 {
        self.timings().last().map_or(LEAD_S, |t| t.1) + TAIL_S
    }

    pub fn audio(&self, seed: u64) -> AudioClip {
        let n = (self.duration_s() * f64::from(RATE)).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples: Vec<f64> = (0..n).map(|_| 0.002 * (rng.gen::<f64>() - 0.5)).collect();
        let rate = f64::from(RATE);
        for (start, end) in self.timings() {
            let a = (start * rate).round() as usize;
            let b = ((end * rate).round() as usize).min(n);
            let ramp = (0.01 * rate) as usize;
            for (k, s) in samples[a..b].iter_mut().enumerate() {
                let t = k as f64 / rate;
                let env = (k.min(b - a - 1 - k) as f64 / ramp as f64).min(1.0);
                let w = 2.0 * std::f64::consts::PI * self.f0_hz * t;
                *s += 0.25 * env * (w.sin() + 0.5 * (2.0 * w).sin() + 0.25 * (3.0 * w).sin());
            }
        }
        AudioClip::new(samples, RATE)
    }

    pub fn ctm_lines(&self, out: &mut String) {
        for (syl, (start, end)) in self.syllables.iter().zip(self.timings()) {
            let _ = writeln!(out, "{} 1 {:.3} {:.3} {}", self.id, start, end - start, syl);
        }
    }
}

const VOCAB: [&str; 12] = [
    "xin", "chào", "các", "bạn", "hôm", "nay", "trời", "đẹp", "quá", "tôi", "đi", "học",
];

/// Pauses well inside each class: none, none, p1, p2, p3, p4.
pub const GAP_MENU: [f64; 6] = [0.06, 0.09, 0.13, 0.18, 0.24, 0.40];

/// `count` utterances with 5-8 syllables each, seeded.
pub fn make_utts(count: usize, seed: u64) -> Vec<FixtureUtt> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let n = rng.gen_range(5..=8);
            let syllables: Vec<String> = (0..n)
                .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())].to_string())
                .collect();
            let durations_s = (0..n)
                .map(|_| f64::from(rng.gen_range(15..=25u32)) / 100.0)
                .collect();
            let gaps_s = (1..n)
                .map(|_| GAP_MENU[rng.gen_range(0..GAP_MENU.len())])
                .collect();
            // Capitalized with a full stop so the manifest text needs normalizing.
            let joined = syllables.join(" ");
            let mut chars = joined.chars();
            let first = chars
                .next()
                .map(|c| c.to_uppercase().collect::<String>())
                .unwrap_or_default();
            let raw = format!("{first}{}.", chars.as_str());
            FixtureUtt {
                id: format!("utt{k:03}"),
                raw_text: raw,
                syllables,
                durations_s,
                gaps_s,
                f0_hz: 110.0 + 10.0 * k as f64,
            }
        })
        .collect()
}

pub struct Fixture {
    pub manifest: PathBuf,
    pub ctm: PathBuf,
}

/// Writes WAVs, a manifest with relative audio paths, and a CTM under `dir`.
pub fn write_fixture(dir: &Path, utts: &[FixtureUtt]) -> Fixture {
    fs::create_dir_all(dir.join("wav")).unwrap();
    let mut manifest = String::new();
    let mut ctm = String::from(";; synthetic hypotheses\n");
    for (k, u) in utts.iter().enumerate() {
        let rel = format!("wav/{}.wav", u.id);
        write_wav(&u.audio(k as u64), dir.join(&rel)).unwrap();
        let _ = writeln!(manifest, "{}\t{}\t{}", u.id, rel, u.raw_text);
        u.ctm_lines(&mut ctm);
    }
    let fx = Fixture {
        manifest: dir.join("manifest.tsv"),
        ctm: dir.join("hyp.ctm"),
    };
    fs::write(&fx.manifest, manifest).unwrap();
    fs::write(&fx.ctm, ctm).unwrap();
    fx
}

/// The punctuated text the pipeline should emit for `u`.
pub fn expected_output(u: &FixtureUtt) -> String {
    let mut words = Vec::new();
    for (i, s) in u.syllables.iter().enumerate() {
        words.push(s.clone());
        let marker = match u.gaps_s.get(i) {
            Some(&g) if g >= 0.27 => Some("<p4>"),
            Some(&g) if g >= 0.21 => Some("<p3>"),
            Some(&g) if g >= 0.15 => Some("<p2>"),
            Some(&g) if g >= 0.12 => Some("<p1>"),
            _ => None,
        };
        words.extend(marker.map(String::from));
    }
    words.join(" ")
}
