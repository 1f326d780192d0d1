//! Defaults file. Every value can be overridden by a command-line flag.
//!
//! ```toml
//! seed = 7
//!
//! [roi]
//! x_max = 20.0
//! y_min = -1.5
//! y_max = 1.5
//!
//! [synth]
//! frames_per_cell = 400
//! scenes = "scenes.toml"     # simulator config; built-in chamber setups when absent
//!
//! [features]
//! apply_roi = true
//! eigen_mode = "joint_covariance"
//!
//! [train]
//! classifier = "svm"
//! k = 10
//! c = 1.0
//! # gamma = 0.01            # median heuristic when absent
//! split_fraction = 0.8
//! append_mask = false
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lidar_weather::features::EigenMode;
use lidar_weather::RoiBounds;
use serde::Deserialize;

pub const CONFIG_ENV: &str = "LIDAR_WEATHER_CONFIG";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub roi: RoiBounds,
    pub synth: SynthSection,
    pub features: FeatureSection,
    pub train: TrainSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub frames_per_cell: usize,
    pub scenes: Option<PathBuf>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { frames_per_cell: 400, scenes: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub apply_roi: bool,
    pub eigen_mode: EigenMode,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self { apply_roi: true, eigen_mode: EigenMode::JointCovariance }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub classifier: String,
    pub k: usize,
    pub c: f64,
    pub gamma: Option<f64>,
    pub split_fraction: f64,
    pub append_mask: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            classifier: "svm".into(),
            k: lidar_weather::classify::DEFAULT_K,
            c: 1.0,
            gamma: None,
            split_fraction: lidar_weather::classify::DEFAULT_TRAIN_FRACTION,
            append_mask: false,
        }
    }
}

impl Config {
    /// Loads `path`; relative paths inside the file resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let (Some(scenes), Some(dir)) = (&cfg.synth.scenes, path.parent()) {
            if scenes.is_relative() {
                cfg.synth.scenes = Some(dir.join(scenes));
            }
        }
        Ok(cfg)
    }
}
