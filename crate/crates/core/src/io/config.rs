//! Run configuration file (TOML). Every section is optional and every key has
//! a default; unknown keys are rejected.
//!
//! ```toml
//! [augment]
//! speed_factors = [0.5, 1.0, 2.0]
//! enable_flip = true
//! root_rotation_samples = 1
//! rng_seed = 0
//!
//! [vae]
//! window = 90
//! latent_dim = 32
//! # ... any VaeConfig field
//!
//! [window]
//! width = 90
//! stride = 90
//! overlap_policy = "take_first"   # take_first | take_last | slerp_blend
//!
//! [smoothing]
//! ratio = 0.5
//!
//! [evaluate]
//! per_frame = false
//! skeleton = "path/to/skeleton.skel"   # bundled default when absent
//!
//! [synth]
//! frames = 120
//! # ... any SyntheticParams field
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticParams;
use crate::augmentation::AugmentConfig;
use crate::error::{Error, Result};
use crate::motion_vae::VaeConfig;
use crate::smoothing::{OverlapPolicy, WindowSpec, DEFAULT_WINDOW};

/// Augmentation used by the CLI when the config file has no `[augment]` section.
pub fn default_cli_augment() -> AugmentConfig {
    AugmentConfig { speed_factors: vec![0.5, 1.0, 2.0], enable_flip: true, root_rotation_samples: 1, rng_seed: 0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSettings {
    pub width: usize,
    pub stride: usize,
    pub overlap_policy: OverlapPolicy,
}

impl Default for WindowSettings {
    fn default() -> Self {
        Self { width: DEFAULT_WINDOW, stride: DEFAULT_WINDOW, overlap_policy: OverlapPolicy::TakeFirst }
    }
}

impl WindowSettings {
    pub fn spec(&self) -> Result<WindowSpec> {
        WindowSpec::new(self.width, self.stride)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSettings {
    pub ratio: f64,
}

impl Default for SmoothingSettings {
    fn default() -> Self {
        Self { ratio: 0.5 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSettings {
    pub per_frame: bool,
    pub skeleton: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub augment: Option<AugmentConfig>,
    pub vae: VaeConfig,
    pub window: WindowSettings,
    pub smoothing: SmoothingSettings,
    pub evaluate: EvaluateSettings,
    pub synth: SyntheticParams,
}

impl RunConfig {
    pub fn parse(text: &str, origin: impl Into<PathBuf>) -> Result<Self> {
        let origin = origin.into();
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config { path: origin.clone(), message: e.to_string().trim_end().to_owned() })?;
        cfg.validate().map_err(|e| Error::Config { path: origin, message: e.to_string() })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        self.vae.validate()?;
        self.window.spec()?;
        if !(0.0..=1.0).contains(&self.smoothing.ratio) {
            return Err(Error::invalid("smoothing.ratio", format!("must lie in [0, 1], got {}", self.smoothing.ratio)));
        }
        Ok(())
    }

    pub fn augment_or_default(&self) -> AugmentConfig {
        self.augment.clone().unwrap_or_else(default_cli_augment)
    }
}
