//! The single pipeline configuration file (TOML).
//!
//! Every table is optional; omitted keys take the defaults shown by
//! `PipelineConfig::default()`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::AlignConfig;
use crate::audio::{DenoiseConfig, F0Config, VadConfig};
use crate::error::{Error, Result};
use crate::punctuation::PunctScheme;
use crate::selection::SelectionConfig;
use crate::textnorm::NormRuleSet;

/// Which audio the articulation power is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSource {
    Denoised,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub target_sample_rate_hz: u32,
    pub denoise_enabled: bool,
    pub power_source: PowerSource,
    pub denoise: DenoiseConfig,
    pub vad: VadConfig,
    pub f0: F0Config,
    pub alignment: AlignConfig,
    pub selection: SelectionConfig,
    pub punctuation: PunctScheme,
    pub textnorm: NormRuleSet,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            target_sample_rate_hz: 16000,
            denoise_enabled: true,
            power_source: PowerSource::Denoised,
            denoise: DenoiseConfig::default(),
            vad: VadConfig::default(),
            f0: F0Config::default(),
            alignment: AlignConfig::default(),
            selection: SelectionConfig::default(),
            punctuation: PunctScheme::default(),
            textnorm: NormRuleSet::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.target_sample_rate_hz == 0 {
            return bad("target_sample_rate_hz must be positive");
        }
        let d = &self.denoise;
        if !(d.frame_ms > 0.0 && d.hop_ms > 0.0 && d.hop_ms <= d.frame_ms) {
            return bad("denoise frame_ms and hop_ms must be positive with hop <= frame");
        }
        if !(0.0..1.0).contains(&d.alpha) || !(0.0..1.0).contains(&d.noise_smoothing) {
            return bad("denoise alpha and noise_smoothing must lie in [0, 1)");
        }
        let v = &self.vad;
        if !(v.frame_ms > 0.0 && v.hop_ms > 0.0 && (0.0..=100.0).contains(&v.floor_percentile)) {
            return bad(
                "vad frame_ms/hop_ms must be positive and floor_percentile within [0, 100]",
            );
        }
        let f = &self.f0;
        if !(f.window_ms > 0.0 && f.hop_ms > 0.0 && f.f_min_hz > 0.0 && f.f_min_hz < f.f_max_hz) {
            return bad("f0 window/hop must be positive and 0 < f_min_hz < f_max_hz");
        }
        if self.alignment.min_gap_s.is_nan() || self.alignment.min_gap_s <= 0.0 {
            return bad("alignment.min_gap_s must be positive");
        }
        if self.alignment.anchor_min_len == 0 {
            return bad("alignment.anchor_min_len must be at least 1");
        }
        self.selection.validate()?;
        self.punctuation.validate()?;
        self.textnorm.validate()
    }
}
