//! Primitive-only traffic scenes and clear-weather ray casting.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::channel::{Ray, Return, ReturnSource, Scan};
use super::config::ChannelConfig;
use super::SimError;
use crate::cloud::{cartesian_from_spherical, ObjectId, SensorDescriptor};

/// Azimuth/elevation ray grid of the simulated sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorGeometry {
    pub azimuth_min_deg: f64,
    pub azimuth_max_deg: f64,
    pub azimuth_steps: usize,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub elevation_steps: usize,
    /// Rays report nothing beyond this range.
    pub max_range: f64,
}

impl Default for SensorGeometry {
    fn default() -> Self {
        // 16 channels over +-15 deg, 0.5 deg azimuth spacing over the forward sector
        Self {
            azimuth_min_deg: -20.0,
            azimuth_max_deg: 20.0,
            azimuth_steps: 81,
            elevation_min_deg: -15.0,
            elevation_max_deg: 15.0,
            elevation_steps: 16,
            max_range: 100.0,
        }
    }
}

impl SensorGeometry {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.azimuth_steps == 0 || self.elevation_steps == 0 {
            return Err(SimError::InvalidScene("ray grid needs at least one step per axis".into()));
        }
        if self.azimuth_min_deg > self.azimuth_max_deg || self.elevation_min_deg > self.elevation_max_deg {
            return Err(SimError::InvalidScene("ray grid bounds are reversed".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(SimError::InvalidScene("max_range must be positive".into()));
        }
        Ok(())
    }

    fn axis(min: f64, max: f64, steps: usize) -> impl Iterator<Item = f64> {
        (0..steps).map(move |i| {
            if steps == 1 {
                min.to_radians()
            } else {
                (min + (max - min) * i as f64 / (steps - 1) as f64).to_radians()
            }
        })
    }

    /// `(theta, phi)` of every ray, elevation-major.
    pub fn rays(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.ray_count());
        for theta in Self::axis(self.elevation_min_deg, self.elevation_max_deg, self.elevation_steps) {
            for phi in Self::axis(self.azimuth_min_deg, self.azimuth_max_deg, self.azimuth_steps) {
                out.push((theta, phi));
            }
        }
        out
    }

    pub fn ray_count(&self) -> usize {
        self.azimuth_steps * self.elevation_steps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Axis-aligned box.
    Box { center: [f64; 3], half_extents: [f64; 3] },
    /// Vertical cylinder.
    Cylinder { center: [f64; 2], radius: f64, z_min: f64, z_max: f64 },
    /// Flat rectangle in the y-z plane at `center[0]`, facing the sensor.
    Plate { center: [f64; 3], half_width: f64, half_height: f64 },
    /// Infinite horizontal plane.
    Ground { height: f64 },
}

impl Shape {
    fn validate(&self) -> Result<(), String> {
        let ok = match self {
            Shape::Box { half_extents, .. } => half_extents.iter().all(|h| *h > 0.0),
            Shape::Cylinder { radius, z_min, z_max, .. } => *radius > 0.0 && z_min < z_max,
            Shape::Plate { half_width, half_height, .. } => *half_width > 0.0 && *half_height > 0.0,
            Shape::Ground { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("degenerate shape {self:?}"))
        }
    }

    /// Distance along the unit direction `d` from the origin to the first
    /// intersection in front of the sensor, with the shape displaced by
    /// `offset`.
    fn intersect(&self, d: [f64; 3], offset: [f64; 3]) -> Option<f64> {
        const EPS: f64 = 1e-9;
        match *self {
            Shape::Box { center, half_extents } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for i in 0..3 {
                    let lo = center[i] + offset[i] - half_extents[i];
                    let hi = center[i] + offset[i] + half_extents[i];
                    if d[i].abs() < EPS {
                        if 0.0 < lo || 0.0 > hi {
                            return None;
                        }
                    } else {
                        let (a, b) = (lo / d[i], hi / d[i]);
                        t_near = t_near.max(a.min(b));
                        t_far = t_far.min(a.max(b));
                    }
                }
                if t_near > t_far || t_far <= EPS {
                    None
                } else if t_near > EPS {
                    Some(t_near)
                } else {
                    // sensor inside the box
                    None
                }
            }
            Shape::Cylinder { center, radius, z_min, z_max } => {
                let (cx, cy) = (center[0] + offset[0], center[1] + offset[1]);
                let a = d[0] * d[0] + d[1] * d[1];
                if a < EPS {
                    return None;
                }
                let b = -2.0 * (d[0] * cx + d[1] * cy);
                let c = cx * cx + cy * cy - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b - disc.sqrt()) / (2.0 * a);
                if t <= EPS {
                    return None;
                }
                let z = t * d[2];
                (z_min + offset[2] <= z && z <= z_max + offset[2]).then_some(t)
            }
            Shape::Plate { center, half_width, half_height } => {
                let px = center[0] + offset[0];
                if d[0] < EPS || px <= 0.0 {
                    return None;
                }
                let t = px / d[0];
                let y = t * d[1] - (center[1] + offset[1]);
                let z = t * d[2] - (center[2] + offset[2]);
                (y.abs() <= half_width && z.abs() <= half_height).then_some(t)
            }
            Shape::Ground { height } => {
                let h = height + offset[2];
                if d[2].abs() < EPS {
                    return None;
                }
                let t = h / d[2];
                (t > EPS).then_some(t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Motion {
    #[default]
    Static,
    /// Constant velocity; the displacement restarts every `period` seconds.
    Linear { velocity: [f64; 3], period: f64 },
    /// Sinusoidal back-and-forth along `direction`.
    Oscillate { direction: [f64; 3], amplitude: f64, period: f64 },
}

impl Motion {
    pub fn displacement(&self, time: f64) -> [f64; 3] {
        match *self {
            Motion::Static => [0.0; 3],
            Motion::Linear { velocity, period } => {
                let t = if period > 0.0 { time.rem_euclid(period) } else { time };
                [velocity[0] * t, velocity[1] * t, velocity[2] * t]
            }
            Motion::Oscillate { direction, amplitude, period } => {
                let s = if period > 0.0 {
                    amplitude * (std::f64::consts::TAU * time / period).sin()
                } else {
                    0.0
                };
                [direction[0] * s, direction[1] * s, direction[2] * s]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub name: String,
    pub shape: Shape,
    /// Diffuse reflectivity in [0, 1].
    pub reflectivity: f64,
    #[serde(default)]
    pub retro_reflective: bool,
    #[serde(default)]
    pub motion: Motion,
}

impl SceneObject {
    pub fn new(name: &str, shape: Shape, reflectivity: f64) -> Self {
        Self {
            name: name.to_string(),
            shape,
            reflectivity,
            retro_reflective: false,
            motion: Motion::Static,
        }
    }

    pub fn retro(mut self) -> Self {
        self.retro_reflective = true;
        self
    }

    pub fn moving(mut self, motion: Motion) -> Self {
        self.motion = motion;
        self
    }
}

/// A scene: its objects (object ids are list positions) and the sensor ray
/// grid observing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub scenario_id: String,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub geometry: SensorGeometry,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.scenario_id.is_empty() {
            return Err(SimError::InvalidScene("empty scenario id".into()));
        }
        self.geometry.validate()?;
        for obj in &self.objects {
            if !(0.0..=1.0).contains(&obj.reflectivity) {
                return Err(SimError::InvalidScene(format!(
                    "object '{}' reflectivity {} outside [0, 1]",
                    obj.name, obj.reflectivity
                )));
            }
            obj.shape.validate().map_err(SimError::InvalidScene)?;
        }
        Ok(())
    }

    pub fn object_id(&self, name: &str) -> Option<ObjectId> {
        self.objects.iter().position(|o| o.name == name).map(|i| i as ObjectId)
    }
}

/// Clear-weather pulse: `base_pulse * reflectivity * (reference_range / r)^2`,
/// multiplied by the retro gain for retro-reflectors.
pub fn clear_pulse(config: &ChannelConfig, reflectivity: f64, retro: bool, range: f64) -> f64 {
    let falloff = (config.reference_range / range).powi(2);
    let gain = if retro { config.retro_gain } else { 1.0 };
    config.base_pulse * reflectivity * falloff * gain
}

/// Ray-casts `scene` at `time`. Every ray hitting an object within the
/// geometry's max range yields one return; measured ranges carry Gaussian
/// noise drawn from `rng`, pulses are computed from the true range.
pub fn render_clear<R: Rng + ?Sized>(
    scene: &SceneSpec,
    time: f64,
    sensor: SensorDescriptor,
    config: &ChannelConfig,
    rng: &mut R,
) -> Scan {
    let offsets: Vec<[f64; 3]> = scene.objects.iter().map(|o| o.motion.displacement(time)).collect();
    let noise = (config.range_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, config.range_noise_sigma).expect("finite sigma"));
    let max_range = scene.geometry.max_range;

    let rays = scene
        .geometry
        .rays()
        .into_iter()
        .map(|(theta, phi)| {
            let (dx, dy, dz) = cartesian_from_spherical(1.0, theta, phi);
            let d = [dx, dy, dz];
            let hit = scene
                .objects
                .iter()
                .zip(&offsets)
                .enumerate()
                .filter_map(|(i, (obj, off))| obj.shape.intersect(d, *off).map(|t| (t, i)))
                .filter(|(t, _)| *t <= max_range)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut returns = Vec::new();
            if let Some((t, idx)) = hit {
                let obj = &scene.objects[idx];
                let measured = match &noise {
                    Some(n) => (t + n.sample(rng)).max(0.05),
                    None => t,
                };
                returns.push(Return {
                    range: measured,
                    pulse: clear_pulse(config, obj.reflectivity, obj.retro_reflective, t),
                    object: Some(idx as ObjectId),
                    retro: obj.retro_reflective,
                    source: ReturnSource::Object,
                });
            }
            Ray { theta, phi, returns }
        })
        .collect();
    Scan { sensor, rays }
}
