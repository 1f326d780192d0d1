//! Simulator configuration.
//!
//! Every constant of the weather channel lives in [`ChannelConfig`]. They are
//! calibration knobs chosen so the synthetic data shows the qualitative
//! signatures observed on real sensors, not physical claims.

use serde::{Deserialize, Serialize};

use super::dataset::WeatherProfile;
use super::presets;
use super::scene::SceneSpec;
use super::SimError;
use crate::cloud::SensorDescriptor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Pulse of a unit-reflectivity target at `reference_range`.
    pub base_pulse: f64,
    pub reference_range: f64,
    /// Pulse multiplier for retro-reflective surfaces.
    pub retro_gain: f64,
    /// Std-dev of the clear-weather range noise in meters.
    pub range_noise_sigma: f64,
    /// Object returns weaker than this are lost in fog and rain.
    pub detection_threshold: f64,
    /// Seconds between consecutive frames of one cell.
    pub frame_period: f64,

    /// Extinction coefficient is `fog_extinction_factor / V` (Koschmieder).
    pub fog_extinction_factor: f64,
    /// Backscatter probability per ray and draw is `min(1, gain * alpha)`.
    pub fog_backscatter_gain: f64,
    /// Backscatter range is exponential with scale `V / divisor`.
    pub fog_range_scale_divisor: f64,
    pub fog_range_min: f64,
    pub fog_range_max: f64,
    /// Independent backscatter draws per ray.
    pub fog_max_echoes: usize,
    /// Backscatter pulse is `fog_pulse * (V / fog_pulse_reference_visibility)^fog_pulse_exponent`.
    /// Models pulse-width growth with thinner fog; qualitative only.
    pub fog_pulse: f64,
    pub fog_pulse_reference_visibility: f64,
    pub fog_pulse_exponent: f64,

    /// Rain extinction `alpha = coefficient * R^exponent` (1/m, R in mm/h).
    pub rain_extinction_coefficient: f64,
    pub rain_extinction_exponent: f64,
    /// Expected droplet echoes per frame per mm/h.
    pub rain_droplets_per_mmh: f64,
    pub rain_droplet_range_min: f64,
    pub rain_droplet_range_max: f64,
    pub rain_droplet_pulse: f64,
    /// Object pulses are scaled by `1 - jitter * u`, `u ~ U[0, 1)`.
    pub rain_pulse_jitter: f64,
    /// Std-dev of the extra range perturbation on object returns in rain.
    pub rain_range_sigma: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            base_pulse: 100.0,
            reference_range: 10.0,
            retro_gain: 20.0,
            range_noise_sigma: 0.02,
            detection_threshold: 0.1,
            frame_period: 0.1,

            fog_extinction_factor: 3.0,
            fog_backscatter_gain: 7.5,
            fog_range_scale_divisor: 6.0,
            fog_range_min: 1.0,
            fog_range_max: 10.0,
            fog_max_echoes: 2,
            fog_pulse: 0.4,
            fog_pulse_reference_visibility: 40.0,
            fog_pulse_exponent: 1.0,

            rain_extinction_coefficient: 3.65e-4,
            rain_extinction_exponent: 0.63,
            rain_droplets_per_mmh: 2.0,
            rain_droplet_range_min: 0.5,
            rain_droplet_range_max: 15.0,
            rain_droplet_pulse: 0.25,
            rain_pulse_jitter: 0.3,
            rain_range_sigma: 0.03,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("base_pulse", self.base_pulse),
            ("reference_range", self.reference_range),
            ("retro_gain", self.retro_gain),
            ("fog_extinction_factor", self.fog_extinction_factor),
            ("fog_range_scale_divisor", self.fog_range_scale_divisor),
            ("fog_pulse_reference_visibility", self.fog_pulse_reference_visibility),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("range_noise_sigma", self.range_noise_sigma),
            ("detection_threshold", self.detection_threshold),
            ("frame_period", self.frame_period),
            ("fog_backscatter_gain", self.fog_backscatter_gain),
            ("fog_pulse", self.fog_pulse),
            ("rain_extinction_coefficient", self.rain_extinction_coefficient),
            ("rain_droplets_per_mmh", self.rain_droplets_per_mmh),
            ("rain_droplet_pulse", self.rain_droplet_pulse),
            ("rain_range_sigma", self.rain_range_sigma),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.rain_pulse_jitter) {
            return Err(SimError::InvalidConfig("rain_pulse_jitter must lie in [0, 1]".into()));
        }
        if !(0.0 < self.fog_range_min && self.fog_range_min < self.fog_range_max) {
            return Err(SimError::InvalidConfig("need 0 < fog_range_min < fog_range_max".into()));
        }
        if !(0.0 < self.rain_droplet_range_min && self.rain_droplet_range_min < self.rain_droplet_range_max) {
            return Err(SimError::InvalidConfig(
                "need 0 < rain_droplet_range_min < rain_droplet_range_max".into(),
            ));
        }
        Ok(())
    }
}

/// Full simulator input: sensor, channel constants, scenes and weather
/// profiles. Read from / written to TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub sensor: SensorDescriptor,
    #[serde(default)]
    pub channel: ChannelConfig,
    pub scenes: Vec<SceneSpec>,
    pub profiles: Vec<WeatherProfile>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sensor: SensorDescriptor::default(),
            channel: ChannelConfig::default(),
            scenes: presets::chamber_setups(),
            profiles: presets::chamber_profiles(),
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        cfg.channel.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }
}
