//! Prosodic punctuation: pause-duration classes and marker insertion.
//!
//! Pauses are classed by duration into `[b0, b1]`, `(b1, b2]`, `(b2, b3]`
//! and `(b3, inf)`; anything shorter than `b0` carries no marker. Class 4
//! doubles as the flag for disfluent pauses.

use serde::{Deserialize, Serialize};

use crate::alignment::SilenceSpan;
use crate::corpus::Syllable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PunctScheme {
    /// `[b0, b1, b2, b3]` in seconds.
    pub boundaries_s: [f64; 4],
    pub markers: [String; 4],
}

impl Default for PunctScheme {
    fn default() -> Self {
        PunctScheme {
            boundaries_s: [0.12, 0.15, 0.21, 0.27],
            markers: ["<p1>", "<p2>", "<p3>", "<p4>"].map(String::from),
        }
    }
}

/// Durations are compared after rounding to the nanosecond, so spans
/// computed by subtracting timestamps (1.15 - 1.0 = 0.1499999...) land on
/// the boundary they denote.
fn snap(duration_s: f64) -> f64 {
    (duration_s * 1e9).round() / 1e9
}

impl PunctScheme {
    pub fn validate(&self) -> Result<()> {
        let b = self.boundaries_s;
        if !(b[0] > 0.0 && b[0] < b[1] && b[1] < b[2] && b[2] < b[3]) {
            return Err(Error::Config(format!(
                "punctuation boundaries must increase strictly: {b:?}"
            )));
        }
        for (i, m) in self.markers.iter().enumerate() {
            if m.is_empty() || m.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "marker `{m}` must be a non-empty token"
                )));
            }
            if self.markers[..i].contains(m) {
                return Err(Error::Config(format!("marker `{m}` is used twice")));
            }
        }
        Ok(())
    }

    pub fn marker(&self, class: u8) -> &str {
        &self.markers[usize::from(class - 1)]
    }

    pub fn is_marker_text(&self, text: &str) -> bool {
        self.markers.iter().any(|m| m == text)
    }
}

/// Pause class 1-4, or `None` below the shortest class.
pub fn classify_silence(duration_s: f64, scheme: &PunctScheme) -> Option<u8> {
    let d = snap(duration_s);
    let [b0, b1, b2, b3] = scheme.boundaries_s;
    if d < b0 {
        None
    } else if d <= b1 {
        Some(1)
    } else if d <= b2 {
        Some(2)
    } else if d <= b3 {
        Some(3)
    } else {
        Some(4)
    }
}

/// Fills in `punct_class` on every span.
pub fn classify_all(silences: &mut [SilenceSpan], scheme: &PunctScheme) {
    for s in silences {
        s.punct_class = classify_silence(s.duration_s, scheme);
    }
}

/// Inserts one marker syllable right after token `after_ref_index` for each
/// classified silence. Silences whose class is unset are classified here.
pub fn insert_punctuation(
    tokens: &[Syllable],
    silences: &[SilenceSpan],
    scheme: &PunctScheme,
) -> Result<Vec<Syllable>> {
    let mut after: Vec<Vec<u8>> = vec![Vec::new(); tokens.len()];
    for s in silences {
        if s.after_ref_index >= tokens.len() {
            return Err(Error::InvalidInput(format!(
                "silence [{}, {}] follows token {} but the utterance has {} tokens",
                s.start_s,
                s.end_s,
                s.after_ref_index,
                tokens.len()
            )));
        }
        if let Some(class) = s
            .punct_class
            .or_else(|| classify_silence(s.duration_s, scheme))
        {
            after[s.after_ref_index].push(class);
        }
    }
    let mut out = Vec::with_capacity(tokens.len() + silences.len());
    for (tok, classes) in tokens.iter().zip(after) {
        out.push(tok.clone());
        out.extend(
            classes
                .into_iter()
                .map(|c| Syllable::marker(scheme.marker(c))),
        );
    }
    Ok(out)
}
