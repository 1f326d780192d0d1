//! Labeled dataset generation over (scene, weather profile) cells.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channel::{apply_fog, apply_rain};
use super::config::ChannelConfig;
use super::scene::{render_clear, SceneSpec};
use super::SimError;
use crate::cloud::{Frame, GroundTruth, SensorDescriptor, WeatherLabel};

/// Weather applied to every frame of a cell. Fog visibility is drawn
/// uniformly from `[visibility_min, visibility_max]` per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeatherProfile {
    pub label: WeatherLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rainfall_rate: Option<f64>,
    /// Mixed into the per-frame seeds of this profile.
    #[serde(default)]
    pub rng_seed: u64,
}

impl WeatherProfile {
    pub fn clear() -> Self {
        Self {
            label: WeatherLabel::Clear,
            visibility_min: None,
            visibility_max: None,
            rainfall_rate: None,
            rng_seed: 0,
        }
    }

    pub fn rain(rainfall_rate: f64) -> Self {
        Self {
            label: WeatherLabel::Rain,
            rainfall_rate: Some(rainfall_rate),
            ..Self::clear()
        }
    }

    pub fn fog(visibility_min: f64, visibility_max: f64) -> Self {
        Self {
            label: WeatherLabel::Fog,
            visibility_min: Some(visibility_min),
            visibility_max: Some(visibility_max),
            ..Self::clear()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let has_vis = self.visibility_min.is_some() || self.visibility_max.is_some();
        let bad = |m: &str| Err(SimError::InvalidProfile(format!("{} profile: {m}", self.label)));
        match self.label {
            WeatherLabel::Clear if has_vis || self.rainfall_rate.is_some() => {
                bad("must not set visibility or rainfall rate")
            }
            WeatherLabel::Rain if has_vis => bad("must not set visibility"),
            WeatherLabel::Rain => match self.rainfall_rate {
                Some(r) if r.is_finite() && r >= 0.0 => Ok(()),
                _ => bad("needs a non-negative rainfall_rate"),
            },
            WeatherLabel::Fog if self.rainfall_rate.is_some() => bad("must not set rainfall rate"),
            WeatherLabel::Fog => match (self.visibility_min, self.visibility_max) {
                (Some(lo), Some(hi)) if lo > 0.0 && lo <= hi && hi.is_finite() => Ok(()),
                _ => bad("needs 0 < visibility_min <= visibility_max"),
            },
            WeatherLabel::Clear => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub frame: Frame,
    pub truth: GroundTruth,
    pub scenario_id: String,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed for one frame: independent of generation order.
pub fn frame_seed(seed: u64, scene: usize, profile: usize, profile_seed: u64, frame: usize) -> u64 {
    [scene as u64, profile as u64, profile_seed, frame as u64]
        .into_iter()
        .fold(splitmix(seed), |acc, v| splitmix(acc ^ splitmix(v)))
}

/// Renders one frame of `scene` under `profile`.
pub fn simulate_frame<R: Rng + ?Sized>(
    scene: &SceneSpec,
    profile: &WeatherProfile,
    time: f64,
    k: u64,
    sensor: SensorDescriptor,
    config: &ChannelConfig,
    rng: &mut R,
) -> (Frame, GroundTruth) {
    let clear = render_clear(scene, time, sensor, config, rng);
    match profile.label {
        WeatherLabel::Clear => (clear.to_frame(k), GroundTruth::clear()),
        WeatherLabel::Rain => {
            let rate = profile.rainfall_rate.expect("validated rain profile");
            let scan = apply_rain(&clear, rate, config, rng);
            let truth = GroundTruth::new(WeatherLabel::Rain, None, Some(rate)).expect("validated rate");
            (scan.to_frame(k), truth)
        }
        WeatherLabel::Fog => {
            let lo = profile.visibility_min.expect("validated fog profile");
            let hi = profile.visibility_max.expect("validated fog profile");
            let v = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let scan = apply_fog(&clear, v, config, rng);
            let truth = GroundTruth::new(WeatherLabel::Fog, Some(v), None).expect("validated visibility");
            (scan.to_frame(k), truth)
        }
    }
}

/// Generates `frames_per_cell` frames for every (scene, profile) pair.
///
/// Samples are ordered scene-major, then profile, then frame; frame `k` is
/// the global sample index. Every frame has its own counter-derived seed so
/// the output is identical regardless of thread count.
pub fn generate_dataset(
    scenes: &[SceneSpec],
    profiles: &[WeatherProfile],
    frames_per_cell: usize,
    seed: u64,
    sensor: SensorDescriptor,
    config: &ChannelConfig,
) -> Result<Vec<Sample>, SimError> {
    if scenes.is_empty() {
        return Err(SimError::EmptyScenes);
    }
    if profiles.is_empty() {
        return Err(SimError::EmptyProfiles);
    }
    if frames_per_cell == 0 {
        return Err(SimError::ZeroFrames);
    }
    config.validate()?;
    let mut ids = HashSet::new();
    for scene in scenes {
        scene.validate()?;
        if !ids.insert(scene.scenario_id.as_str()) {
            return Err(SimError::DuplicateScenario(scene.scenario_id.clone()));
        }
    }
    for p in profiles {
        p.validate()?;
    }

    let per_scene = profiles.len() * frames_per_cell;
    let total = scenes.len() * per_scene;
    let samples = (0..total)
        .into_par_iter()
        .map(|global| {
            let si = global / per_scene;
            let pi = (global % per_scene) / frames_per_cell;
            let fi = global % frames_per_cell;
            let (scene, profile) = (&scenes[si], &profiles[pi]);
            let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, si, pi, profile.rng_seed, fi));
            let time = fi as f64 * config.frame_period;
            let (frame, truth) = simulate_frame(scene, profile, time, global as u64, sensor, config, &mut rng);
            Sample {
                frame,
                truth,
                scenario_id: scene.scenario_id.clone(),
            }
        })
        .collect();
    Ok(samples)
}
