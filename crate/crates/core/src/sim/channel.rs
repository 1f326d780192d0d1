//! Simplified fog and rain lidar channel.
//!
//! The channel works on a ray-structured [`Scan`] rather than a flat
//! [`Frame`]: fog and rain add echoes to rays that hit nothing, which a frame
//! cannot represent. [`Scan::to_frame`] assigns echo numbers afterwards.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::config::ChannelConfig;
use crate::cloud::{cartesian_from_spherical, Frame, ObjectId, Point, SensorDescriptor, MAX_ECHOES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReturnSource {
    Object,
    Fog,
    Rain,
}

/// One candidate echo on a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Return {
    pub range: f64,
    pub pulse: f64,
    pub object: Option<ObjectId>,
    pub retro: bool,
    pub source: ReturnSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub theta: f64,
    pub phi: f64,
    pub returns: Vec<Return>,
}

impl Ray {
    /// Range of the nearest hard target on this ray.
    fn object_range(&self) -> f64 {
        self.returns
            .iter()
            .filter(|r| r.source == ReturnSource::Object)
            .map(|r| r.range)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub sensor: SensorDescriptor,
    pub rays: Vec<Ray>,
}

impl Scan {
    pub fn count_source(&self, source: ReturnSource) -> usize {
        self.rays
            .iter()
            .flat_map(|r| &r.returns)
            .filter(|r| r.source == source)
            .count()
    }

    /// Converts the scan into a frame, numbering echoes per ray.
    ///
    /// Three-echo sensors report the first three returns ordered by range.
    /// Dual-return sensors report the strongest return as echo 1 (the second
    /// strongest when the strongest is also the last) and the last return as
    /// echo 2; a ray with a single return reports it twice.
    pub fn to_frame(&self, k: u64) -> Frame {
        let mut points = Vec::new();
        for ray in &self.rays {
            if ray.returns.is_empty() {
                continue;
            }
            let mut sorted = ray.returns.clone();
            sorted.sort_by(|a, b| a.range.total_cmp(&b.range));
            if self.sensor.max_echoes() >= MAX_ECHOES {
                for (i, ret) in sorted.iter().take(MAX_ECHOES as usize).enumerate() {
                    points.push(point_from_return(ray, ret, i as u8 + 1));
                }
            } else {
                let last = sorted.len() - 1;
                let mut by_strength: Vec<usize> = (0..sorted.len()).collect();
                by_strength.sort_by(|&a, &b| sorted[b].pulse.total_cmp(&sorted[a].pulse).then(a.cmp(&b)));
                let strongest = if by_strength[0] == last && by_strength.len() > 1 {
                    by_strength[1]
                } else {
                    by_strength[0]
                };
                points.push(point_from_return(ray, &sorted[strongest], 1));
                points.push(point_from_return(ray, &sorted[last], 2));
            }
        }
        Frame::new(k, self.sensor, points)
    }
}

fn point_from_return(ray: &Ray, ret: &Return, echo: u8) -> Point {
    let (x, y, z) = cartesian_from_spherical(ret.range, ray.theta, ray.phi);
    Point::new(x, y, z, echo, ret.pulse)
        .expect("channel returns have finite ranges and non-negative pulses")
        .with_object(ret.object)
}

/// Extinction coefficient (1/m) for meteorological visibility `visibility`.
pub fn fog_extinction(config: &ChannelConfig, visibility: f64) -> f64 {
    if visibility.is_infinite() {
        0.0
    } else {
        config.fog_extinction_factor / visibility
    }
}

pub fn rain_extinction(config: &ChannelConfig, rainfall_rate: f64) -> f64 {
    config.rain_extinction_coefficient * rainfall_rate.powf(config.rain_extinction_exponent)
}

/// Draws from an exponential distribution with the given scale, truncated to
/// `[lo, hi]`, by inverting the CDF.
fn truncated_exponential<R: Rng + ?Sized>(rng: &mut R, scale: f64, lo: f64, hi: f64) -> f64 {
    let f_lo = 1.0 - (-lo / scale).exp();
    let f_hi = 1.0 - (-hi / scale).exp();
    let u: f64 = rng.random();
    let x = -scale * (1.0 - (f_lo + u * (f_hi - f_lo))).ln();
    x.clamp(lo, hi)
}

/// Passes a scan through fog of meteorological visibility `visibility` (m).
///
/// Per ray: object pulses are attenuated by the two-way transmission
/// `exp(-2 alpha r)` and lost below the detection threshold unless
/// retro-reflective; up to `fog_max_echoes` backscatter returns are added in
/// front of the nearest hard target.
///
/// # Panics
///
/// Panics if `visibility` is not positive.
pub fn apply_fog<R: Rng + ?Sized>(scan: &Scan, visibility: f64, config: &ChannelConfig, rng: &mut R) -> Scan {
    assert!(visibility > 0.0, "visibility must be positive, got {visibility}");
    let alpha = fog_extinction(config, visibility);
    if alpha == 0.0 {
        return scan.clone();
    }
    let p_backscatter = (config.fog_backscatter_gain * alpha).min(1.0);
    let range_scale = visibility / config.fog_range_scale_divisor;
    let fog_pulse = config.fog_pulse
        * (visibility / config.fog_pulse_reference_visibility).powf(config.fog_pulse_exponent);

    let rays = scan
        .rays
        .iter()
        .map(|ray| {
            let target = ray.object_range();
            let mut returns: Vec<Return> = ray
                .returns
                .iter()
                .filter_map(|ret| {
                    let pulse = ret.pulse * (-2.0 * alpha * ret.range).exp();
                    (ret.retro || pulse >= config.detection_threshold).then_some(Return { pulse, ..*ret })
                })
                .collect();
            for _ in 0..config.fog_max_echoes {
                let emit = rng.random::<f64>() < p_backscatter;
                let range = truncated_exponential(rng, range_scale, config.fog_range_min, config.fog_range_max);
                if emit && range < target {
                    returns.push(Return {
                        range,
                        pulse: fog_pulse,
                        object: None,
                        retro: false,
                        source: ReturnSource::Fog,
                    });
                }
            }
            Ray { returns, ..*ray }
        })
        .collect();
    Scan { sensor: scan.sensor, rays }
}

/// Passes a scan through rain of rate `rainfall_rate` (mm/h).
///
/// Object returns get mild extinction, multiplicative pulse jitter in
/// `(1 - jitter, 1]` and a small range perturbation. A Poisson number of
/// droplet echoes (mean proportional to the rate) is scattered over random
/// rays at uniform ranges; droplets behind a hard target are occluded.
///
/// # Panics
///
/// Panics if `rainfall_rate` is negative.
pub fn apply_rain<R: Rng + ?Sized>(scan: &Scan, rainfall_rate: f64, config: &ChannelConfig, rng: &mut R) -> Scan {
    assert!(rainfall_rate >= 0.0, "rainfall rate must be non-negative, got {rainfall_rate}");
    if rainfall_rate == 0.0 {
        return scan.clone();
    }
    let alpha = rain_extinction(config, rainfall_rate);
    let range_noise = (config.rain_range_sigma > 0.0)
        .then(|| Normal::new(0.0, config.rain_range_sigma).expect("finite sigma"));

    let mut rays: Vec<Ray> = scan
        .rays
        .iter()
        .map(|ray| {
            let returns = ray
                .returns
                .iter()
                .filter_map(|ret| {
                    let jitter = 1.0 - config.rain_pulse_jitter * rng.random::<f64>();
                    let pulse = ret.pulse * (-2.0 * alpha * ret.range).exp() * jitter;
                    let range = match (&range_noise, ret.source) {
                        (Some(n), ReturnSource::Object) => (ret.range + n.sample(rng)).max(0.05),
                        _ => ret.range,
                    };
                    (ret.retro || pulse >= config.detection_threshold).then_some(Return { range, pulse, ..*ret })
                })
                .collect();
            Ray { returns, ..*ray }
        })
        .collect();

    let mean_droplets = config.rain_droplets_per_mmh * rainfall_rate;
    if mean_droplets > 0.0 && !rays.is_empty() {
        let count = Poisson::new(mean_droplets).expect("positive rate").sample(rng) as usize;
        for _ in 0..count {
            let idx = rng.random_range(0..rays.len());
            let range = rng.random_range(config.rain_droplet_range_min..config.rain_droplet_range_max);
            let ray = &mut rays[idx];
            if range < ray.object_range() {
                ray.returns.push(Return {
                    range,
                    pulse: config.rain_droplet_pulse,
                    object: None,
                    retro: false,
                    source: ReturnSource::Rain,
                });
            }
        }
    }
    Scan { sensor: scan.sensor, rays }
}
