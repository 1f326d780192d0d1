//! Synthetic multi-echo lidar data under clear, rain and fog conditions.
//!
//! Scenes are ray-cast into a per-ray [`Scan`], passed through a simplified
//! weather channel and converted into labeled frames.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod presets;
pub mod scene;

use thiserror::Error;

pub use channel::{apply_fog, apply_rain, fog_extinction, rain_extinction, Ray, Return, ReturnSource, Scan};
pub use config::{ChannelConfig, SimConfig};
pub use dataset::{frame_seed, generate_dataset, simulate_frame, Sample, WeatherProfile};
pub use scene::{clear_pulse, render_clear, Motion, SceneObject, SceneSpec, SensorGeometry, Shape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no scenes given")]
    EmptyScenes,
    #[error("no weather profiles given")]
    EmptyProfiles,
    #[error("frames per cell must be at least 1")]
    ZeroFrames,
    #[error("scenario id '{0}' used by more than one scene")]
    DuplicateScenario(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid weather profile: {0}")]
    InvalidProfile(String),
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
}
