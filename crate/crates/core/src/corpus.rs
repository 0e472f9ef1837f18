//! Utterance records and the tab-separated manifest format.
//!
//! A manifest holds one utterance per line as `id<TAB>audio_path<TAB>text`,
//! UTF-8 with LF line endings. Blank lines are ignored. The text column is
//! everything after the second tab, so it may itself contain tabs.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::alignment::SilenceSpan;
use crate::audio::SegmentList;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;

/// One normalized syllable, or an inserted prosodic marker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Syllable {
    pub text: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_marker: bool,
}

impl Syllable {
    pub fn new(text: impl Into<String>) -> Self {
        Syllable {
            text: text.into(),
            is_marker: false,
        }
    }

    pub fn marker(text: impl Into<String>) -> Self {
        Syllable {
            text: text.into(),
            is_marker: true,
        }
    }
}

/// A syllable carrying the time span transferred from the hypothesis.
///
/// Unaligned tokens (reference syllables the recognizer deleted) carry a
/// zero-length span at the end of the previous aligned token so the
/// sequence stays time-sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedToken {
    pub syllable: Syllable,
    pub start_s: f64,
    pub end_s: f64,
    pub aligned: bool,
}

impl TimedToken {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Why an utterance was dropped from the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    WerFilter,
    Articulation,
    StdSylDur,
    NonFluency,
    StdF0,
    /// The utterance could not be processed (unreadable audio, no
    /// hypothesis, no aligned syllables). Details are in the diagnostic.
    ProcessingError,
}

impl RejectReason {
    pub const ALL: [RejectReason; 6] = [
        RejectReason::WerFilter,
        RejectReason::Articulation,
        RejectReason::StdSylDur,
        RejectReason::NonFluency,
        RejectReason::StdF0,
        RejectReason::ProcessingError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::WerFilter => "wer_filter",
            RejectReason::Articulation => "articulation",
            RejectReason::StdSylDur => "std_syl_dur",
            RejectReason::NonFluency => "non_fluency",
            RejectReason::StdF0 => "std_f0",
            RejectReason::ProcessingError => "processing_error",
        }
    }
}

/// Selection outcome. An utterance is kept exactly when no reason was
/// recorded against it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionVerdict {
    pub reasons: BTreeSet<RejectReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl SelectionVerdict {
    pub fn kept(&self) -> bool {
        self.reasons.is_empty()
    }

    pub fn reject(&mut self, reason: RejectReason) {
        self.reasons.insert(reason);
    }

    pub fn fail(&mut self, diagnostic: impl Into<String>) {
        self.reasons.insert(RejectReason::ProcessingError);
        self.diagnostic = Some(diagnostic.into());
    }
}

/// Alignment outcome kept on the record once hypotheses are reconciled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub wer: f64,
    /// `(ref_start_index, length)` of each anchor run.
    pub anchors: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub audio_path: PathBuf,
    pub raw_text: String,
    #[serde(default)]
    pub norm_tokens: Vec<Syllable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<SegmentList>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentSummary>,
    #[serde(default)]
    pub timed_tokens: Vec<TimedToken>,
    #[serde(default)]
    pub silences: Vec<SilenceSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    #[serde(default)]
    pub punctuated: Vec<Syllable>,
    #[serde(default)]
    pub verdict: SelectionVerdict,
}

impl UtteranceRecord {
    pub fn new(
        id: impl Into<String>,
        audio_path: impl Into<PathBuf>,
        raw_text: impl Into<String>,
    ) -> Self {
        UtteranceRecord {
            id: id.into(),
            audio_path: audio_path.into(),
            raw_text: raw_text.into(),
            norm_tokens: Vec::new(),
            segments: None,
            alignment: None,
            timed_tokens: Vec::new(),
            silences: Vec::new(),
            metrics: None,
            punctuated: Vec::new(),
            verdict: SelectionVerdict::default(),
        }
    }

    /// Text written to an output manifest: the punctuated syllables if the
    /// punctuation stage ran, else the normalized syllables, else the raw
    /// transcript.
    pub fn output_text(&self) -> String {
        if !self.punctuated.is_empty() {
            join_syllables(&self.punctuated)
        } else if !self.norm_tokens.is_empty() {
            join_syllables(&self.norm_tokens)
        } else {
            self.raw_text.clone()
        }
    }
}

pub fn join_syllables(syllables: &[Syllable]) -> String {
    let mut out = String::new();
    for (i, s) in syllables.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&s.text);
    }
    out
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(BufReader::new(file), path)
}

/// Parses manifest lines from `reader`; `origin` is only used in errors.
pub fn parse_manifest<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<UtteranceRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: &str| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            msg: msg.to_string(),
        };
        let mut cols = line.splitn(3, '\t');
        let id = cols.next().unwrap_or_default();
        let audio = cols
            .next()
            .ok_or_else(|| malformed("expected `id<TAB>audio_path<TAB>text`"))?;
        let text = cols
            .next()
            .ok_or_else(|| malformed("expected `id<TAB>audio_path<TAB>text`"))?;
        if id.is_empty() {
            return Err(malformed("empty utterance id"));
        }
        if audio.is_empty() {
            return Err(malformed("empty audio path"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        records.push(UtteranceRecord::new(id, audio, text));
    }
    Ok(records)
}

/// Writes `id<TAB>audio_path<TAB>text` lines sorted by id.
pub fn save_manifest(
    records: &[UtteranceRecord],
    path: impl AsRef<Path>,
    kept_only: bool,
) -> Result<()> {
    let path = path.as_ref();
    let mut selected: Vec<&UtteranceRecord> = records
        .iter()
        .filter(|r| !kept_only || r.verdict.kept())
        .collect();
    selected.sort_by(|a, b| a.id.cmp(&b.id));

    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for rec in selected {
        let text = rec.output_text();
        if text.contains('\n') || rec.id.contains(['\t', '\n']) {
            return Err(Error::InvalidInput(format!(
                "utterance `{}` cannot be written as a single manifest line",
                rec.id
            )));
        }
        writeln!(out, "{}\t{}\t{}", rec.id, rec.audio_path.display(), text)
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
