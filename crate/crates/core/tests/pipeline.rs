mod common;

use std::fs;

use common::{expected_output, make_utts, write_fixture};
use foundcorpus::corpus::{load_manifest, RejectReason};
use foundcorpus::pipeline::{
    run_pipeline, run_stage, CorpusState, RunOptions, Stage, StageInputs, METRICS_FILE,
    OUTPUT_MANIFEST, STATE_FILE, SUMMARY_FILE,
};
use foundcorpus::{Error, PipelineConfig};
use tempfile::tempdir;

fn opts(jobs: usize) -> RunOptions {
    RunOptions {
        jobs,
        write_denoised: false,
    }
}

#[test]
fn three_utterances_end_to_end() {
    let dir = tempdir().unwrap();
    let utts = make_utts(3, 7);
    let fx = write_fixture(dir.path(), &utts);
    let out = dir.path().join("out");
    let summary = run_pipeline(
        &fx.manifest,
        &fx.ctm,
        &PipelineConfig::default(),
        &out,
        &opts(2),
    )
    .unwrap();
    assert_eq!((summary.total, summary.kept, summary.rejected), (3, 3, 0));

    let metrics = fs::read_to_string(out.join(METRICS_FILE)).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    let state = CorpusState::load(&out).unwrap();
    assert_eq!(state.completed, Stage::ORDER);
    for rec in &state.records {
        let m = rec.metrics.as_ref().unwrap();
        assert_eq!(m.wer, 0.0);
        assert!(m.p_signal > 0.0 && m.articulation > 0.0);
        assert!(m.std_f0_hz < 3.0, "{}: std F0 {}", rec.id, m.std_f0_hz);
    }

    let kept = load_manifest(out.join(OUTPUT_MANIFEST)).unwrap();
    assert_eq!(kept.len(), 3);
    for (rec, u) in kept.iter().zip(&utts) {
        assert_eq!(rec.id, u.id);
        assert_eq!(rec.raw_text, expected_output(u));
    }
    assert!(out.join(SUMMARY_FILE).exists());
}

#[test]
fn empty_manifest_yields_empty_outputs() {
    let dir = tempdir().unwrap();
    let fx = write_fixture(dir.path(), &[]);
    let out = dir.path().join("out");
    let summary = run_pipeline(
        &fx.manifest,
        &fx.ctm,
        &PipelineConfig::default(),
        &out,
        &opts(1),
    )
    .unwrap();
    assert_eq!((summary.total, summary.kept), (0, 0));
    assert_eq!(
        fs::read_to_string(out.join(METRICS_FILE)).unwrap().trim(),
        foundcorpus::metrics::CSV_HEADER
    );
    assert_eq!(fs::read_to_string(out.join(OUTPUT_MANIFEST)).unwrap(), "");
}

#[test]
fn utterance_missing_from_ctm_is_rejected_not_fatal() {
    let dir = tempdir().unwrap();
    let utts = make_utts(3, 11);
    let fx = write_fixture(dir.path(), &utts);
    let ctm = fs::read_to_string(&fx.ctm).unwrap();
    let pruned: String = ctm
        .lines()
        .filter(|l| !l.starts_with("utt001 "))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&fx.ctm, pruned).unwrap();

    let out = dir.path().join("out");
    let summary = run_pipeline(
        &fx.manifest,
        &fx.ctm,
        &PipelineConfig::default(),
        &out,
        &opts(1),
    )
    .unwrap();
    assert_eq!((summary.total, summary.kept), (3, 2));
    assert_eq!(summary.by_reason["processing_error"], 1);

    let state = CorpusState::load(&out).unwrap();
    let bad = state.records.iter().find(|r| r.id == "utt001").unwrap();
    assert!(bad.verdict.reasons.contains(&RejectReason::ProcessingError));
    let diag = bad.verdict.diagnostic.as_deref().unwrap();
    assert!(diag.starts_with("align:") && diag.contains("CTM"), "{diag}");
    let kept = load_manifest(out.join(OUTPUT_MANIFEST)).unwrap();
    assert!(kept.iter().all(|r| r.id != "utt001"));
}

#[test]
fn unreadable_audio_is_rejected_not_fatal() {
    let dir = tempdir().unwrap();
    let utts = make_utts(2, 3);
    let fx = write_fixture(dir.path(), &utts);
    fs::write(dir.path().join("wav/utt000.wav"), b"not a wav").unwrap();
    let out = dir.path().join("out");
    let summary = run_pipeline(
        &fx.manifest,
        &fx.ctm,
        &PipelineConfig::default(),
        &out,
        &opts(1),
    )
    .unwrap();
    assert_eq!((summary.total, summary.kept), (2, 1));
    let state = CorpusState::load(&out).unwrap();
    assert!(state.records[0]
        .verdict
        .diagnostic
        .as_deref()
        .unwrap()
        .starts_with("denoise:"));
}

#[test]
fn metrics_before_align_is_an_error() {
    let dir = tempdir().unwrap();
    let fx = write_fixture(dir.path(), &make_utts(1, 5));
    let out = dir.path().join("out");
    let cfg = PipelineConfig::default();
    let inputs = StageInputs {
        manifest: Some(fx.manifest.clone()),
        ctm: None,
    };
    for stage in [Stage::Denoise, Stage::Normalize, Stage::Vad] {
        run_stage(stage, &out, &cfg, &opts(1), &inputs).unwrap();
    }
    let err = run_stage(Stage::Metrics, &out, &cfg, &opts(1), &inputs).unwrap_err();
    assert!(
        matches!(
            err,
            Error::MissingStage {
                stage: "metrics",
                missing: "align"
            }
        ),
        "{err}"
    );
}

#[test]
fn stage_without_state_names_the_first_stage() {
    let dir = tempdir().unwrap();
    let err = run_stage(
        Stage::Vad,
        dir.path(),
        &PipelineConfig::default(),
        &opts(1),
        &StageInputs::default(),
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            Error::MissingStage {
                missing: "denoise",
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn rerunning_a_stage_invalidates_later_ones() {
    let dir = tempdir().unwrap();
    let fx = write_fixture(dir.path(), &make_utts(1, 9));
    let out = dir.path().join("out");
    run_pipeline(
        &fx.manifest,
        &fx.ctm,
        &PipelineConfig::default(),
        &out,
        &opts(1),
    )
    .unwrap();
    let state = run_stage(
        Stage::Normalize,
        &out,
        &PipelineConfig::default(),
        &opts(1),
        &StageInputs::default(),
    )
    .unwrap();
    assert_eq!(state.completed, [Stage::Denoise, Stage::Normalize]);
    let err = run_stage(
        Stage::Metrics,
        &out,
        &PipelineConfig::default(),
        &opts(1),
        &StageInputs::default(),
    );
    assert!(err.is_err());
}

#[test]
fn stage_by_stage_matches_full_run() {
    let dir = tempdir().unwrap();
    let fx = write_fixture(dir.path(), &make_utts(4, 21));
    let cfg = PipelineConfig::default();
    let full = dir.path().join("full");
    run_pipeline(&fx.manifest, &fx.ctm, &cfg, &full, &opts(3)).unwrap();

    let staged = dir.path().join("staged");
    let inputs = StageInputs {
        manifest: Some(fx.manifest.clone()),
        ctm: Some(fx.ctm.clone()),
    };
    for stage in Stage::ORDER {
        run_stage(stage, &staged, &cfg, &opts(1), &inputs).unwrap();
    }
    for file in [STATE_FILE, METRICS_FILE, SUMMARY_FILE, OUTPUT_MANIFEST] {
        let a = fs::read_to_string(full.join(file)).unwrap();
        let b = fs::read_to_string(staged.join(file)).unwrap();
        let diff = a.lines().zip(b.lines()).find(|(x, y)| x != y);
        assert!(a == b, "{file} differs at {diff:?}");
    }
}
