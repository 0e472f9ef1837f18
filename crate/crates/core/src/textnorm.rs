//! Rule-based normalization of Vietnamese transcripts into syllables.
//!
//! Text is lowercased and NFC-composed, then each whitespace token is either
//! expanded through the abbreviation table or split on orthographic
//! punctuation, with ASCII digits verbalized one by one. Anything else is
//! passed through as an opaque syllable so alignment can anchor around it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Syllable;
use crate::error::{Error, Result};

const DEFAULT_STRIP: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~\u{201c}\u{201d}\u{2018}\u{2019}\u{2026}\u{2013}\u{2014}\u{00ab}\u{00bb}\u{00a1}\u{00bf}\u{00b7}";

/// Normalization tables. Serialized as
///
/// ```toml
/// strip_chars = ".,;:!?"
/// [digits]
/// "5" = "năm"
/// [abbreviations]
/// "tp.hcm" = "thành phố hồ chí minh"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormRuleSet {
    #[serde(rename = "digits")]
    pub digit_map: BTreeMap<String, String>,
    /// Keys are matched against a whole lowercased token first, then
    /// against each punctuation- or digit-delimited piece of it. Values are
    /// whitespace-separated syllables.
    #[serde(rename = "abbreviations")]
    pub abbreviation_map: BTreeMap<String, String>,
    #[serde(with = "char_set")]
    pub strip_chars: BTreeSet<char>,
}

impl Default for NormRuleSet {
    fn default() -> Self {
        let digits = [
            "không", "một", "hai", "ba", "bốn", "năm", "sáu", "bảy", "tám", "chín",
        ];
        NormRuleSet {
            digit_map: digits
                .iter()
                .enumerate()
                .map(|(d, w)| (d.to_string(), w.to_string()))
                .collect(),
            abbreviation_map: BTreeMap::new(),
            strip_chars: DEFAULT_STRIP.chars().collect(),
        }
    }
}

mod char_set {
    use std::collections::BTreeSet;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(set: &BTreeSet<char>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&set.iter().collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<char>, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.chars().collect())
    }
}

fn fold(text: &str) -> String {
    text.to_lowercase().nfc().collect()
}

impl NormRuleSet {
    /// Checks that every table output is already a normalized syllable and
    /// that expansion cannot feed back into itself.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (digit, word) in &self.digit_map {
            if digit.len() != 1 || !digit.chars().all(|c| c.is_ascii_digit()) {
                return bad(format!("digit map key `{digit}` is not an ASCII digit"));
            }
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return bad(format!("digit `{digit}` must map to a single syllable"));
            }
            self.check_output(word)?;
        }
        for (key, expansion) in &self.abbreviation_map {
            if key.is_empty() || key.chars().any(char::is_whitespace) || *key != fold(key) {
                return bad(format!(
                    "abbreviation key `{key}` must be a lowercase token"
                ));
            }
            if expansion.split_whitespace().next().is_none() {
                return bad(format!("abbreviation `{key}` has an empty expansion"));
            }
            for syl in expansion.split_whitespace() {
                self.check_output(syl)?;
                if self.abbreviation_map.contains_key(syl) {
                    return bad(format!(
                        "abbreviation `{key}` expands to another abbreviation `{syl}`"
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_output(&self, syl: &str) -> Result<()> {
        if syl != fold(syl)
            || syl
                .chars()
                .any(|c| self.strip_chars.contains(&c) || self.digit_word(c).is_some())
        {
            return Err(Error::Config(format!(
                "rule output `{syl}` is not a normalized syllable"
            )));
        }
        Ok(())
    }

    fn digit_word(&self, c: char) -> Option<&String> {
        self.digit_map.get(c.encode_utf8(&mut [0u8; 4]) as &str)
    }

    fn push_expansion(&self, key: &str, out: &mut Vec<Syllable>) -> bool {
        match self.abbreviation_map.get(key) {
            Some(expansion) => {
                out.extend(expansion.split_whitespace().map(|s| Syllable::new(fold(s))));
                true
            }
            None => false,
        }
    }

    fn push_piece(&self, piece: &str, out: &mut Vec<Syllable>) {
        if self.push_expansion(piece, out) {
            return;
        }
        let mut run = String::new();
        for c in piece.chars() {
            if let Some(word) = self.digit_word(c) {
                self.flush_run(&mut run, out);
                out.push(Syllable::new(word.clone()));
            } else {
                run.push(c);
            }
        }
        self.flush_run(&mut run, out);
    }

    fn flush_run(&self, run: &mut String, out: &mut Vec<Syllable>) {
        if run.is_empty() {
            return;
        }
        if !self.push_expansion(run, out) {
            if !run.chars().all(char::is_alphanumeric) {
                log::warn!("passing through unrecognized symbol `{run}` as a syllable");
            }
            out.push(Syllable::new(run.clone()));
        }
        run.clear();
    }
}

/// Turns a raw transcript into lowercase NFC syllables.
///
/// Mixed-script tokens such as "VLSP" become a single syllable.
pub fn normalize(raw_text: &str, rules: &NormRuleSet) -> Vec<Syllable> {
    let mut out = Vec::new();
    for token in raw_text.split_whitespace() {
        let token = fold(token);
        if rules.push_expansion(&token, &mut out) {
            continue;
        }
        let spaced: String = token
            .chars()
            .map(|c| {
                if rules.strip_chars.contains(&c) {
                    ' '
                } else {
                    c
                }
            })
            .collect();
        for piece in spaced.split_whitespace() {
            rules.push_piece(piece, &mut out);
        }
    }
    out
}
