use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use foundcorpus::analysis::{load_cmos, mds_1d, one_sample_ttest};
use foundcorpus::pipeline::{run_pipeline, run_stage, CorpusState, RunOptions, Stage, StageInputs};
use foundcorpus::selection::selection_summary;
use foundcorpus::{Error, PipelineConfig};

/// Curate found speech data into a prosody-annotated TTS training set.
#[derive(Parser)]
#[command(name = "foundcorpus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct StageArgs {
    /// Output directory holding the state sidecar and stage outputs.
    #[arg(long)]
    out: PathBuf,
    /// Pipeline configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for per-utterance processing.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        ctm: PathBuf,
        #[arg(long)]
        write_denoised: bool,
        #[command(flatten)]
        common: StageArgs,
    },
    /// Load, resample and denoise audio; starts a new state from the manifest.
    Denoise {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        write_denoised: bool,
        #[command(flatten)]
        common: StageArgs,
    },
    /// Normalize transcripts into syllables.
    Normalize(StageArgs),
    /// Detect speech segments.
    Vad(StageArgs),
    /// Align CTM hypotheses to the normalized text.
    Align {
        #[arg(long)]
        ctm: PathBuf,
        #[command(flatten)]
        common: StageArgs,
    },
    /// Compute per-utterance selection metrics.
    Metrics(StageArgs),
    /// Apply the WER filter and per-metric rejection.
    Select(StageArgs),
    /// Insert pause markers and write the kept-only manifest.
    Punctuate(StageArgs),
    /// Print the selection summary of an output directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Order systems from a CMOS table with one-dimensional MDS.
    Mds {
        #[arg(long)]
        input: PathBuf,
        /// Reference system placed on the positive end of the axis.
        #[arg(long = "ref", default_value = "NAT")]
        reference: String,
        /// Also write the completed (antisymmetric) matrix as CSV.
        #[arg(long)]
        write_matrix: Option<PathBuf>,
    },
    /// One-sample t-test of ratings (whitespace-separated numbers).
    Ttest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        mu0: f64,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn load_config(path: Option<&Path>) -> foundcorpus::Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn stage(
    stage: Stage,
    common: &StageArgs,
    write_denoised: bool,
    inputs: StageInputs,
) -> anyhow::Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    let opts = RunOptions {
        jobs: common.jobs,
        write_denoised,
    };
    let state = run_stage(stage, &common.out, &cfg, &opts, &inputs)?;
    let s = selection_summary(&state.records);
    println!("{}: {} utterances, {} kept", stage.name(), s.total, s.kept);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            manifest,
            ctm,
            write_denoised,
            common,
        } => {
            let cfg = load_config(common.config.as_deref())?;
            let opts = RunOptions {
                jobs: common.jobs,
                write_denoised,
            };
            let summary = run_pipeline(&manifest, &ctm, &cfg, &common.out, &opts)?;
            println!("{}", summary_line(&summary));
        }
        Command::Denoise {
            manifest,
            write_denoised,
            common,
        } => stage(
            Stage::Denoise,
            &common,
            write_denoised,
            StageInputs {
                manifest: Some(manifest),
                ctm: None,
            },
        )?,
        Command::Normalize(c) => stage(Stage::Normalize, &c, false, StageInputs::default())?,
        Command::Vad(c) => stage(Stage::Vad, &c, false, StageInputs::default())?,
        Command::Align { ctm, common } => stage(
            Stage::Align,
            &common,
            false,
            StageInputs {
                manifest: None,
                ctm: Some(ctm),
            },
        )?,
        Command::Metrics(c) => stage(Stage::Metrics, &c, false, StageInputs::default())?,
        Command::Select(c) => stage(Stage::Select, &c, false, StageInputs::default())?,
        Command::Punctuate(c) => stage(Stage::Punctuate, &c, false, StageInputs::default())?,
        Command::Report { out } => {
            let state = CorpusState::load(&out)?;
            let done: Vec<&str> = state.completed.iter().map(|s| s.name()).collect();
            println!("stages: {}", done.join(" "));
            let s = selection_summary(&state.records);
            println!(
                "total\t{}\nkept\t{}\nrejected\t{}",
                s.total, s.kept, s.rejected
            );
            for (reason, count) in &s.by_reason {
                println!("{reason}\t{count}");
            }
            for rec in state
                .records
                .iter()
                .filter(|r| r.verdict.diagnostic.is_some())
            {
                println!(
                    "# {}: {}",
                    rec.id,
                    rec.verdict.diagnostic.as_deref().unwrap_or_default()
                );
            }
        }
        Command::Mds {
            input,
            reference,
            write_matrix,
        } => {
            let matrix = load_cmos(&input)?;
            if let Some(path) = write_matrix {
                std::fs::write(&path, matrix.to_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            print!("{}", mds_1d(&matrix, &reference)?.render());
        }
        Command::Ttest { input, mu0 } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let ratings = text
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .with_context(|| format!("bad rating `{t}`"))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let res = one_sample_ttest(&ratings, mu0)?;
            println!("t\t{}\ndf\t{}\np\t{}", res.t, res.df, res.p);
        }
        Command::DefaultConfig => print!("{}", PipelineConfig::default().to_toml()),
    }
    Ok(())
}

fn summary_line(s: &foundcorpus::selection::SelectionSummary) -> String {
    let reasons: Vec<String> = s
        .by_reason
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    format!(
        "total={} kept={} rejected={} {}",
        s.total,
        s.kept,
        s.rejected,
        reasons.join(" ")
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
