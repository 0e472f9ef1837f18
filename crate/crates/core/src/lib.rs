//! Curation of found speech data into a cleaned, prosody-annotated TTS
//! training set.
//!
//! The pipeline denoises and resamples audio, normalizes transcripts,
//! reconciles externally decoded time-aligned hypotheses with the text,
//! computes per-utterance selection metrics, rejects outliers and inserts
//! pause-duration markers into the text. The [`analysis`] module holds the
//! listening-test tooling (CMOS t-tests and MDS ordering).

pub mod alignment;
pub mod analysis;
pub mod audio;
pub mod config;
pub mod corpus;
mod error;
pub mod metrics;
pub mod pipeline;
pub mod punctuation;
pub mod selection;
pub mod textnorm;

pub use config::PipelineConfig;
pub use error::{Error, Result};
