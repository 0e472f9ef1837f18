//! Reconciliation of externally decoded, time-aligned hypotheses with the
//! normalized reference text.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Syllable, TimedToken};
use crate::error::{Error, Result};

/// One decoded token with its time span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypToken {
    pub text: String,
    pub start_s: f64,
    pub dur_s: f64,
}

impl HypToken {
    pub fn new(text: impl Into<String>, start_s: f64, dur_s: f64) -> Self {
        HypToken {
            text: text.into(),
            start_s,
            dur_s,
        }
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.dur_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditOp {
    Match { ref_i: usize, hyp_j: usize },
    Substitute { ref_i: usize, hyp_j: usize },
    DeleteRef { ref_i: usize },
    InsertHyp { hyp_j: usize },
}

/// Minimum-edit-distance alignment of reference syllables to hypothesis
/// tokens, in reference order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditAlignment {
    pub ops: Vec<EditOp>,
    pub wer: f64,
    /// `(ref_start_index, length)` of maximal Match runs at least
    /// `anchor_min_len` long.
    pub anchors: Vec<(usize, usize)>,
}

impl EditAlignment {
    /// Substitutions + deletions + insertions.
    pub fn distance(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| !matches!(op, EditOp::Match { .. }))
            .count()
    }
}

/// A pause between two aligned syllables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilenceSpan {
    pub start_s: f64,
    pub end_s: f64,
    pub duration_s: f64,
    /// Reference index of the syllable preceding the pause.
    pub after_ref_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub punct_class: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub anchor_min_len: usize,
    /// Whether substituted syllables inherit the hypothesis timestamps.
    pub trust_substitutions: bool,
    pub min_gap_s: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            anchor_min_len: 3,
            trust_substitutions: true,
            min_gap_s: 0.05,
        }
    }
}

/// Reads a CTM file (`utt-id channel start dur token [confidence]`).
/// Lines starting with `;;` are comments.
pub fn load_ctm(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<HypToken>>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ctm(BufReader::new(file), path)
}

pub fn parse_ctm<R: BufRead>(reader: R, origin: &Path) -> Result<BTreeMap<String, Vec<HypToken>>> {
    let mut out: BTreeMap<String, Vec<HypToken>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;") {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if !(5..=6).contains(&fields.len()) {
            return Err(bad(format!(
                "expected `utt-id channel start dur token`, got {} fields",
                fields.len()
            )));
        }
        let number = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("invalid {what} `{s}`")))
        };
        let start = number(fields[2], "start time")?;
        let dur = number(fields[3], "duration")?;
        if start < 0.0 {
            return Err(bad(format!("negative start time {start}")));
        }
        if dur <= 0.0 {
            return Err(bad(format!("non-positive duration {dur}")));
        }
        out.entry(fields[0].to_string())
            .or_default()
            .push(HypToken::new(fields[4], start, dur));
    }
    for tokens in out.values_mut() {
        tokens.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    }
    Ok(out)
}

/// Unit-cost Levenshtein alignment with a deterministic backtrace: at each
/// step Match is preferred over Substitute, DeleteRef and InsertHyp, in
/// that order.
pub fn align_hyp_to_ref(
    reference: &[Syllable],
    hyp: &[HypToken],
    anchor_min_len: usize,
) -> Result<EditAlignment> {
    if reference.is_empty() {
        return Err(Error::InvalidInput(
            "cannot align against an empty reference".into(),
        ));
    }
    let (n, m) = (reference.len(), hyp.len());
    let width = m + 1;
    let mut dist = vec![0u32; (n + 1) * width];
    for (j, d) in dist[..width].iter_mut().enumerate() {
        *d = j as u32;
    }
    for i in 1..=n {
        dist[i * width] = i as u32;
        for j in 1..=m {
            let sub = u32::from(reference[i - 1].text != hyp[j - 1].text);
            dist[i * width + j] = (dist[(i - 1) * width + j - 1] + sub)
                .min(dist[(i - 1) * width + j] + 1)
                .min(dist[i * width + j - 1] + 1);
        }
    }

    let at = |i: usize, j: usize| dist[i * width + j];
    let mut ops = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = at(i, j);
        if i > 0 && j > 0 && reference[i - 1].text == hyp[j - 1].text && here == at(i - 1, j - 1) {
            ops.push(EditOp::Match {
                ref_i: i - 1,
                hyp_j: j - 1,
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && here == at(i - 1, j - 1) + 1 {
            ops.push(EditOp::Substitute {
                ref_i: i - 1,
                hyp_j: j - 1,
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && here == at(i - 1, j) + 1 {
            ops.push(EditOp::DeleteRef { ref_i: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::InsertHyp { hyp_j: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();

    let mut anchors = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for op in ops.iter().map(Some).chain(std::iter::once(None)) {
        match op {
            Some(EditOp::Match { ref_i, .. }) => {
                run = Some(match run {
                    Some((start, len)) => (start, len + 1),
                    None => (*ref_i, 1),
                });
            }
            _ => {
                if let Some((start, len)) = run.take() {
                    if len >= anchor_min_len.max(1) {
                        anchors.push((start, len));
                    }
                }
            }
        }
    }

    Ok(EditAlignment {
        wer: f64::from(at(n, m)) / n as f64,
        ops,
        anchors,
    })
}

/// Gives each reference syllable the time span of the hypothesis token it
/// was paired with. Deleted syllables (and substituted ones, unless
/// `trust_substitutions`) are marked unaligned with an empty span at the
/// end of the previous aligned syllable.
pub fn transfer_timestamps(
    reference: &[Syllable],
    alignment: &EditAlignment,
    hyp: &[HypToken],
    trust_substitutions: bool,
) -> Vec<TimedToken> {
    let mut paired: Vec<Option<usize>> = vec![None; reference.len()];
    for op in &alignment.ops {
        match *op {
            EditOp::Match { ref_i, hyp_j } => paired[ref_i] = Some(hyp_j),
            EditOp::Substitute { ref_i, hyp_j } if trust_substitutions => {
                paired[ref_i] = Some(hyp_j)
            }
            _ => {}
        }
    }
    let mut prev_end = 0.0;
    reference
        .iter()
        .zip(paired)
        .map(|(syl, pair)| match pair {
            Some(j) => {
                let tok = &hyp[j];
                prev_end = tok.end_s();
                TimedToken {
                    syllable: syl.clone(),
                    start_s: tok.start_s,
                    end_s: tok.end_s(),
                    aligned: true,
                }
            }
            None => TimedToken {
                syllable: syl.clone(),
                start_s: prev_end,
                end_s: prev_end,
                aligned: false,
            },
        })
        .collect()
}

/// Pauses of at least `min_gap_s` between consecutive aligned syllables.
/// Leading and trailing silence is never reported.
pub fn detect_internal_silences(tokens: &[TimedToken], min_gap_s: f64) -> Vec<SilenceSpan> {
    let min_gap = min_gap_s.max(f64::MIN_POSITIVE);
    let aligned: Vec<(usize, &TimedToken)> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.aligned)
        .collect();
    aligned
        .windows(2)
        .filter_map(|pair| {
            let (idx, prev) = pair[0];
            let next = pair[1].1;
            let gap = next.start_s - prev.end_s;
            (gap >= min_gap).then_some(SilenceSpan {
                start_s: prev.end_s,
                end_s: next.start_s,
                duration_s: gap,
                after_ref_index: idx,
                punct_class: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn syls(words: &[&str]) -> Vec<Syllable> {
        words.iter().map(|w| Syllable::new(*w)).collect()
    }

    fn hyps(words: &[&str]) -> Vec<HypToken> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| HypToken::new(*w, 0.3 * i as f64, 0.2))
            .collect()
    }

    fn ctm(s: &str) -> Result<BTreeMap<String, Vec<HypToken>>> {
        parse_ctm(Cursor::new(s), Path::new("t.ctm"))
    }

    #[test]
    fn ctm_parsing() {
        assert!(ctm("").unwrap().is_empty());
        let map =
            ctm("u1 1 0.50 0.20 chào\n;; comment\nu1 1 0.10 0.30 xin\nu2 A 0 1 a 0.9\n").unwrap();
        assert_eq!(map.len(), 2);
        let u1 = &map["u1"];
        assert_eq!(u1.len(), 2);
        assert_eq!(u1[0].text, "xin");
        assert_eq!(u1[1].start_s, 0.5);
    }

    #[test]
    fn ctm_errors_carry_line_numbers() {
        match ctm("u1 1 0 0.1 a\nu1 1 0.2 -0.1 b\n").unwrap_err() {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("duration"));
            }
            e => panic!("{e:?}"),
        }
        assert!(matches!(
            ctm("u1 1 zero 0.1 a\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ctm("u1 1 0.1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn identical_sequences_match() {
        let al = align_hyp_to_ref(&syls(&["a", "b", "c"]), &hyps(&["a", "b", "c"]), 3).unwrap();
        assert_eq!(al.wer, 0.0);
        assert!(al.ops.iter().all(|op| matches!(op, EditOp::Match { .. })));
        assert_eq!(al.anchors, [(0, 3)]);
    }

    #[test]
    fn single_substitution() {
        let al = align_hyp_to_ref(
            &syls(&["a", "b", "c", "d"]),
            &hyps(&["a", "x", "c", "d"]),
            3,
        )
        .unwrap();
        assert_eq!(al.wer, 0.25);
        assert_eq!(al.ops[1], EditOp::Substitute { ref_i: 1, hyp_j: 1 });
        assert!(al.anchors.is_empty());
    }

    #[test]
    fn empty_hypothesis_deletes_everything() {
        let al = align_hyp_to_ref(&syls(&["a", "b"]), &[], 3).unwrap();
        assert_eq!(al.wer, 1.0);
        assert_eq!(
            al.ops,
            [
                EditOp::DeleteRef { ref_i: 0 },
                EditOp::DeleteRef { ref_i: 1 }
            ]
        );
    }

    #[test]
    fn empty_reference_is_rejected() {
        assert!(align_hyp_to_ref(&[], &hyps(&["a"]), 3).is_err());
    }

    #[test]
    fn tie_break_prefers_substitution_over_indels() {
        // [a b] vs [b c]: distance 2 either as two substitutions or as
        // delete-a + insert-c; the fixed order picks substitutions.
        let al = align_hyp_to_ref(&syls(&["a", "b"]), &hyps(&["b", "c"]), 3).unwrap();
        assert_eq!(
            al.ops,
            [
                EditOp::Substitute { ref_i: 0, hyp_j: 0 },
                EditOp::Substitute { ref_i: 1, hyp_j: 1 }
            ]
        );
    }

    #[test]
    fn anchors_are_maximal_runs() {
        let r = syls(&["a", "b", "c", "d", "e", "f", "g", "h"]);
        let h = hyps(&["a", "b", "c", "d", "x", "f", "g", "h"]);
        let al = align_hyp_to_ref(&r, &h, 3).unwrap();
        assert_eq!(al.anchors, [(0, 4), (5, 3)]);
        let al = align_hyp_to_ref(&r, &h, 4).unwrap();
        assert_eq!(al.anchors, [(0, 4)]);
    }

    #[test]
    fn transfer_copies_times_and_marks_deletions() {
        let r = syls(&["a", "b", "c"]);
        let h = hyps(&["a", "b", "c"]);
        let al = align_hyp_to_ref(&r, &h, 3).unwrap();
        let timed = transfer_timestamps(&r, &al, &h, true);
        for (t, hy) in timed.iter().zip(&h) {
            assert!(t.aligned);
            assert_eq!(t.start_s, hy.start_s);
            assert_eq!(t.end_s, hy.end_s());
        }

        let h = hyps(&["a", "c"]);
        let al = align_hyp_to_ref(&r, &h, 3).unwrap();
        let timed = transfer_timestamps(&r, &al, &h, true);
        assert!(timed[0].aligned && !timed[1].aligned && timed[2].aligned);
        assert_eq!(timed[1].start_s, timed[0].end_s);
    }

    #[test]
    fn untrusted_substitutions_are_unaligned() {
        let r = syls(&["a", "b", "c"]);
        let h = hyps(&["a", "x", "c"]);
        let al = align_hyp_to_ref(&r, &h, 3).unwrap();
        assert!(transfer_timestamps(&r, &al, &h, true)[1].aligned);
        assert!(!transfer_timestamps(&r, &al, &h, false)[1].aligned);
    }

    fn timed(spans: &[(f64, f64)]) -> Vec<TimedToken> {
        spans
            .iter()
            .map(|&(s, e)| TimedToken {
                syllable: Syllable::new("x"),
                start_s: s,
                end_s: e,
                aligned: true,
            })
            .collect()
    }

    #[test]
    fn internal_silences() {
        let toks = timed(&[(2.0, 2.2), (2.21, 2.4), (2.42, 2.6)]);
        assert!(detect_internal_silences(&toks, 0.05).is_empty());

        let toks = timed(&[(0.8, 1.0), (1.3, 1.5)]);
        let s = detect_internal_silences(&toks, 0.05);
        assert_eq!(s.len(), 1);
        assert_eq!(
            (s[0].start_s, s[0].end_s, s[0].after_ref_index),
            (1.0, 1.3, 0)
        );
        assert!((s[0].duration_s - 0.3).abs() < 1e-12);

        assert!(detect_internal_silences(&timed(&[(0.5, 0.7)]), 0.05).is_empty());
    }

    #[test]
    fn silences_skip_unaligned_tokens() {
        let mut toks = timed(&[(0.0, 0.2), (0.2, 0.2), (0.5, 0.7)]);
        toks[1].aligned = false;
        let s = detect_internal_silences(&toks, 0.05);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].after_ref_index, 0);
    }

    proptest! {
        #[test]
        fn op_counts_cover_both_sides(
            r in prop::collection::vec(0u8..4, 1..12),
            h in prop::collection::vec(0u8..4, 0..12),
        ) {
            let rs: Vec<Syllable> = r.iter().map(|v| Syllable::new(v.to_string())).collect();
            let hs: Vec<HypToken> = h.iter().enumerate().map(|(i, v)| HypToken::new(v.to_string(), i as f64, 0.5)).collect();
            let al = align_hyp_to_ref(&rs, &hs, 3).unwrap();
            let mut ref_seen = vec![0; rs.len()];
            let mut hyp_seen = vec![0; hs.len()];
            for op in &al.ops {
                match *op {
                    EditOp::Match { ref_i, hyp_j } | EditOp::Substitute { ref_i, hyp_j } => {
                        ref_seen[ref_i] += 1;
                        hyp_seen[hyp_j] += 1;
                    }
                    EditOp::DeleteRef { ref_i } => ref_seen[ref_i] += 1,
                    EditOp::InsertHyp { hyp_j } => hyp_seen[hyp_j] += 1,
                }
            }
            prop_assert!(ref_seen.iter().all(|&c| c == 1));
            prop_assert!(hyp_seen.iter().all(|&c| c == 1));
            prop_assert_eq!(al.wer, al.distance() as f64 / rs.len() as f64);
        }

        #[test]
        fn wer_ignores_relabeling(r in prop::collection::vec(0u8..3, 1..8), h in prop::collection::vec(0u8..3, 0..8)) {
            let label = |v: u8, shift: u8| Syllable::new(format!("s{}", (v + shift) % 3));
            let a = align_hyp_to_ref(
                &r.iter().map(|&v| label(v, 0)).collect::<Vec<_>>(),
                &h.iter().map(|&v| HypToken::new(label(v, 0).text, 0.0, 1.0)).collect::<Vec<_>>(),
                3,
            ).unwrap();
            let b = align_hyp_to_ref(
                &r.iter().map(|&v| label(v, 1)).collect::<Vec<_>>(),
                &h.iter().map(|&v| HypToken::new(label(v, 1).text, 0.0, 1.0)).collect::<Vec<_>>(),
                3,
            ).unwrap();
            prop_assert_eq!(a.wer, b.wer);
            let self_al = align_hyp_to_ref(
                &r.iter().map(|&v| label(v, 0)).collect::<Vec<_>>(),
                &r.iter().map(|&v| HypToken::new(label(v, 0).text, 0.0, 1.0)).collect::<Vec<_>>(),
                3,
            ).unwrap();
            prop_assert_eq!(self_al.wer, 0.0);
        }

        #[test]
        fn monotone_hypothesis_gives_sorted_tokens(
            words in prop::collection::vec(0u8..4, 1..15),
            drop_mask in prop::collection::vec(any::<bool>(), 15),
            gaps in prop::collection::vec(0.0f64..0.4, 15),
        ) {
            let reference: Vec<Syllable> = words.iter().map(|v| Syllable::new(v.to_string())).collect();
            let mut t = 0.0;
            let mut hyp = Vec::new();
            for (i, w) in words.iter().enumerate() {
                t += gaps[i];
                if !drop_mask[i] {
                    hyp.push(HypToken::new(w.to_string(), t, 0.1));
                }
                t += 0.1;
            }
            let al = align_hyp_to_ref(&reference, &hyp, 3).unwrap();
            let timed = transfer_timestamps(&reference, &al, &hyp, true);
            prop_assert_eq!(timed.len(), reference.len());
            for pair in timed.windows(2) {
                prop_assert!(pair[0].start_s <= pair[1].start_s);
                prop_assert!(pair[0].end_s <= pair[1].start_s + 1e-12);
            }
            for s in detect_internal_silences(&timed, 0.05) {
                prop_assert!(s.duration_s >= 0.05);
            }
        }
    }
}
