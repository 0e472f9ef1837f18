//! End-to-end curation: denoise -> normalize -> vad -> align -> metrics ->
//! select -> punctuate.
//!
//! Every stage reads and writes the state sidecar (`state.json`) in the
//! output directory, so stages can run one at a time or all at once with
//! identical results. Per-utterance failures reject that utterance with a
//! diagnostic and never abort the run.
//!
//! # State sidecar
//!
//! ```json
//! {
//!   "version": 1,
//!   "manifest": "input manifest path, as given",
//!   "completed": ["denoise", "normalize", ...],
//!   "records": [ { "id": ..., "audio_path": ..., "raw_text": ...,
//!                  "norm_tokens": [{"text": ...}], "segments": [...],
//!                  "alignment": {"wer": ..., "anchors": [[start, len]]},
//!                  "timed_tokens": [...], "silences": [...],
//!                  "metrics": {...}, "punctuated": [...],
//!                  "verdict": {"reasons": [...], "diagnostic": ...} } ]
//! }
//! ```
//!
//! Records are stored sorted by id; a record is kept when its `reasons`
//! list is empty.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{
    align_hyp_to_ref, detect_internal_silences, load_ctm, transfer_timestamps, HypToken,
};
use crate::audio::{
    denoise_mmse, detect_speech, load_wav, resample, track_f0, write_wav, AudioClip,
};
use crate::config::{PipelineConfig, PowerSource};
use crate::corpus::{
    load_manifest, save_manifest, AlignmentSummary, RejectReason, UtteranceRecord,
};
use crate::error::{Error, Result};
use crate::metrics::{build_report, CSV_HEADER};
use crate::punctuation::{classify_all, insert_punctuation};
use crate::selection::{
    apply_percentile_rejection, apply_wer_filter, selection_summary, SelectionSummary,
};
use crate::textnorm::normalize;

pub const STATE_FILE: &str = "state.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const OUTPUT_MANIFEST: &str = "manifest.tsv";
pub const DENOISED_DIR: &str = "denoised";

const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Denoise,
    Normalize,
    Vad,
    Align,
    Metrics,
    Select,
    Punctuate,
}

impl Stage {
    pub const ORDER: [Stage; 7] = [
        Stage::Denoise,
        Stage::Normalize,
        Stage::Vad,
        Stage::Align,
        Stage::Metrics,
        Stage::Select,
        Stage::Punctuate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Denoise => "denoise",
            Stage::Normalize => "normalize",
            Stage::Vad => "vad",
            Stage::Align => "align",
            Stage::Metrics => "metrics",
            Stage::Select => "select",
            Stage::Punctuate => "punctuate",
        }
    }

    pub fn prerequisite(self) -> Option<Stage> {
        let pos = Stage::ORDER.iter().position(|&s| s == self)?;
        pos.checked_sub(1).map(|p| Stage::ORDER[p])
    }

    fn per_utterance(self) -> bool {
        self < Stage::Select
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusState {
    pub version: u32,
    pub manifest: PathBuf,
    pub completed: Vec<Stage>,
    pub records: Vec<UtteranceRecord>,
}

impl CorpusState {
    pub fn from_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut records = load_manifest(path)?;
        records.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(CorpusState {
            version: STATE_VERSION,
            manifest: path.to_path_buf(),
            completed: Vec::new(),
            records,
        })
    }

    pub fn load(out_dir: impl AsRef<Path>) -> Result<Self> {
        let path = out_dir.as_ref().join(STATE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::State { path, source })
    }

    pub fn save(&self, out_dir: impl AsRef<Path>) -> Result<()> {
        let path = out_dir.as_ref().join(STATE_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|source| Error::State {
            path: path.clone(),
            source,
        })?;
        text.push('\n');
        write_file(&path, &text)
    }

    pub fn has_completed(&self, stage: Stage) -> bool {
        self.completed.contains(&stage)
    }

    fn require(&self, stage: Stage) -> Result<()> {
        match stage.prerequisite() {
            Some(prev) if !self.has_completed(prev) => Err(Error::MissingStage {
                stage: stage.name(),
                missing: prev.name(),
            }),
            _ => Ok(()),
        }
    }

    /// Records `stage` as done and forgets any later stage it invalidates.
    fn mark(&mut self, stage: Stage) {
        self.completed.retain(|&s| s < stage);
        self.completed.push(stage);
    }

    fn manifest_dir(&self) -> PathBuf {
        self.manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads for per-utterance stages.
    pub jobs: usize,
    pub write_denoised: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            jobs: 1,
            write_denoised: false,
        }
    }
}

/// Inputs a stage may need besides the state sidecar.
#[derive(Debug, Clone, Default)]
pub struct StageInputs {
    pub manifest: Option<PathBuf>,
    pub ctm: Option<PathBuf>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs a single stage against the state in `out_dir`. The `denoise` stage
/// starts a fresh state from `inputs.manifest`.
pub fn run_stage(
    stage: Stage,
    out_dir: &Path,
    cfg: &PipelineConfig,
    opts: &RunOptions,
    inputs: &StageInputs,
) -> Result<CorpusState> {
    let mut state = if stage == Stage::Denoise {
        let manifest = inputs
            .manifest
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("the denoise stage needs a manifest".into()))?;
        CorpusState::from_manifest(manifest)?
    } else if out_dir.join(STATE_FILE).exists() {
        CorpusState::load(out_dir)?
    } else {
        return Err(Error::MissingStage {
            stage: stage.name(),
            missing: Stage::Denoise.name(),
        });
    };
    state.require(stage)?;
    execute(&mut state, &[stage], out_dir, cfg, opts, inputs)?;
    state.save(out_dir)?;
    Ok(state)
}

/// Runs every stage in order and returns the selection summary.
pub fn run_pipeline(
    manifest: &Path,
    ctm: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<SelectionSummary> {
    let mut state = CorpusState::from_manifest(manifest)?;
    let inputs = StageInputs {
        manifest: Some(manifest.to_path_buf()),
        ctm: Some(ctm.to_path_buf()),
    };
    execute(&mut state, &Stage::ORDER, out_dir, cfg, opts, &inputs)?;
    state.save(out_dir)?;
    Ok(selection_summary(&state.records))
}

fn execute(
    state: &mut CorpusState,
    stages: &[Stage],
    out_dir: &Path,
    cfg: &PipelineConfig,
    opts: &RunOptions,
    inputs: &StageInputs,
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let per_utt: Vec<Stage> = stages
        .iter()
        .copied()
        .filter(|s| s.per_utterance())
        .collect();
    if !per_utt.is_empty() {
        let hyps = if per_utt.contains(&Stage::Align) {
            let ctm = inputs
                .ctm
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("the align stage needs a CTM file".into()))?;
            Some(load_ctm(ctm)?)
        } else {
            None
        };
        let denoised_dir = (opts.write_denoised && per_utt.contains(&Stage::Denoise))
            .then(|| out_dir.join(DENOISED_DIR));
        if let Some(dir) = &denoised_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let ctx = UtteranceContext {
            cfg,
            manifest_dir: state.manifest_dir(),
            hyps: hyps.as_ref(),
            denoised_dir,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
        pool.install(|| {
            state
                .records
                .par_iter_mut()
                .for_each(|rec| process_utterance(rec, &per_utt, &ctx));
        });
        for &stage in &per_utt {
            state.mark(stage);
            log::info!(
                "stage {} done for {} utterances",
                stage.name(),
                state.records.len()
            );
        }
        if per_utt.contains(&Stage::Metrics) {
            write_metrics_csv(&state.records, &out_dir.join(METRICS_FILE))?;
        }
    }

    if stages.contains(&Stage::Select) {
        select(&mut state.records, cfg)?;
        state.mark(Stage::Select);
        let mut text = serde_json::to_string_pretty(&selection_summary(&state.records))
            .expect("summary serializes");
        text.push('\n');
        write_file(&out_dir.join(SUMMARY_FILE), &text)?;
    }

    if stages.contains(&Stage::Punctuate) {
        for rec in state.records.iter_mut().filter(|r| !failed(r)) {
            classify_all(&mut rec.silences, &cfg.punctuation);
            match insert_punctuation(&rec.norm_tokens, &rec.silences, &cfg.punctuation) {
                Ok(tokens) => rec.punctuated = tokens,
                Err(e) => fail(rec, Stage::Punctuate, &e),
            }
        }
        state.mark(Stage::Punctuate);
        save_manifest(&state.records, out_dir.join(OUTPUT_MANIFEST), true)?;
    }
    Ok(())
}

fn failed(rec: &UtteranceRecord) -> bool {
    rec.verdict.reasons.contains(&RejectReason::ProcessingError)
}

fn fail(rec: &mut UtteranceRecord, stage: Stage, err: &Error) {
    log::warn!("rejecting `{}` at stage {}: {err}", rec.id, stage.name());
    rec.verdict.fail(format!("{}: {err}", stage.name()));
}

struct UtteranceContext<'a> {
    cfg: &'a PipelineConfig,
    manifest_dir: PathBuf,
    hyps: Option<&'a BTreeMap<String, Vec<HypToken>>>,
    denoised_dir: Option<PathBuf>,
}

/// Audio at the target rate, before and after noise suppression.
struct PreparedAudio {
    raw: AudioClip,
    processed: AudioClip,
}

impl UtteranceContext<'_> {
    fn prepare(&self, rec: &UtteranceRecord) -> Result<PreparedAudio> {
        let path = if rec.audio_path.is_absolute() {
            rec.audio_path.clone()
        } else {
            self.manifest_dir.join(&rec.audio_path)
        };
        let clip = load_wav(&path)?;
        if clip.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} has no samples",
                path.display()
            )));
        }
        let raw = resample(&clip, self.cfg.target_sample_rate_hz);
        let processed = if self.cfg.denoise_enabled {
            denoise_mmse(&raw, &self.cfg.denoise)?
        } else {
            raw.clone()
        };
        Ok(PreparedAudio { raw, processed })
    }
}

fn process_utterance(rec: &mut UtteranceRecord, stages: &[Stage], ctx: &UtteranceContext) {
    let mut audio: Option<PreparedAudio> = None;
    for &stage in stages {
        if failed(rec) {
            return;
        }
        if let Err(e) = run_step(rec, stage, ctx, &mut audio) {
            fail(rec, stage, &e);
        }
    }
}

fn audio_for<'a>(
    rec: &UtteranceRecord,
    ctx: &UtteranceContext,
    cache: &'a mut Option<PreparedAudio>,
) -> Result<&'a PreparedAudio> {
    if cache.is_none() {
        *cache = Some(ctx.prepare(rec)?);
    }
    Ok(cache.as_ref().expect("filled above"))
}

fn run_step(
    rec: &mut UtteranceRecord,
    stage: Stage,
    ctx: &UtteranceContext,
    cache: &mut Option<PreparedAudio>,
) -> Result<()> {
    let cfg = ctx.cfg;
    match stage {
        Stage::Denoise => {
            let audio = audio_for(rec, ctx, cache)?;
            if let Some(dir) = &ctx.denoised_dir {
                let name = format!("{}.wav", rec.id.replace(['/', '\\'], "_"));
                write_wav(&audio.processed, dir.join(name))?;
            }
        }
        Stage::Normalize => {
            rec.norm_tokens = normalize(&rec.raw_text, &cfg.textnorm);
            if rec.norm_tokens.is_empty() {
                return Err(Error::InvalidInput(
                    "transcript has no syllables after normalization".into(),
                ));
            }
        }
        Stage::Vad => {
            let audio = audio_for(rec, ctx, cache)?;
            rec.segments = Some(detect_speech(&audio.processed, &cfg.vad));
        }
        Stage::Align => {
            let hyp = ctx
                .hyps
                .and_then(|h| h.get(&rec.id))
                .ok_or_else(|| Error::InvalidInput("no hypothesis tokens in the CTM".into()))?;
            let al = align_hyp_to_ref(&rec.norm_tokens, hyp, cfg.alignment.anchor_min_len)?;
            rec.timed_tokens = transfer_timestamps(
                &rec.norm_tokens,
                &al,
                hyp,
                cfg.alignment.trust_substitutions,
            );
            rec.silences = detect_internal_silences(&rec.timed_tokens, cfg.alignment.min_gap_s);
            rec.alignment = Some(AlignmentSummary {
                wer: al.wer,
                anchors: al.anchors,
            });
        }
        Stage::Metrics => {
            let segments = rec
                .segments
                .clone()
                .ok_or_else(|| Error::InvalidInput("speech segments missing".into()))?;
            let audio = audio_for(rec, ctx, cache)?;
            let track = track_f0(&audio.processed, &segments, &cfg.f0);
            let power_clip = match cfg.power_source {
                PowerSource::Denoised => &audio.processed,
                PowerSource::Raw => &audio.raw,
            };
            rec.metrics = Some(build_report(rec, power_clip, &segments, &track)?);
        }
        Stage::Select | Stage::Punctuate => unreachable!("corpus-level stage"),
    }
    Ok(())
}

/// WER filter then percentile rejection over the utterances that made it
/// through processing. Earlier selection reasons are cleared first.
fn select(records: &mut Vec<UtteranceRecord>, cfg: &PipelineConfig) -> Result<()> {
    for rec in records.iter_mut() {
        rec.verdict
            .reasons
            .retain(|&r| r == RejectReason::ProcessingError);
    }
    let (mut eligible, others): (Vec<_>, Vec<_>) = std::mem::take(records)
        .into_iter()
        .partition(|r| !failed(r) && r.metrics.is_some());
    apply_wer_filter(&mut eligible, &cfg.selection)?;
    apply_percentile_rejection(&mut eligible, &cfg.selection)?;
    records.extend(eligible);
    records.extend(others);
    records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(())
}

fn write_metrics_csv(records: &[UtteranceRecord], path: &Path) -> Result<()> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for rec in records {
        if let Some(m) = &rec.metrics {
            let _ = writeln!(out, "{}", m.csv_row(&rec.id));
        }
    }
    write_file(path, &out)
}
