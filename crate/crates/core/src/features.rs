//! Per-frame feature vector.
//!
//! Slot layout (1-based, as used in exported tables):
//!
//! | slot    | feature                                   |
//! |---------|-------------------------------------------|
//! | f1..f3  | point count per echo N1, N2, N3           |
//! | f4..f6  | mean range per echo r1, r2, r3            |
//! | f7, f8  | mean and variance of the echo number      |
//! | f9      | mean range over all points                |
//! | f10     | mean azimuth                              |
//! | f11     | mean elevation                            |
//! | f12     | variance of the pulse measure             |
//! | f13     | mean of the pulse measure                 |
//! | f14..16 | covariance eigenvalues of (x, y, z)       |
//!
//! A statistic whose defining point set is empty is stored as `0.0` with its
//! mask bit set, so downstream distance computations stay total.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{partition_by_echo, roi_filter, Frame, Point, RoiBounds, MAX_ECHOES};

pub const FEATURE_COUNT: usize = 16;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "n1", "n2", "n3", "mean_r1", "mean_r2", "mean_r3", "mean_echo", "var_echo", "mean_r",
    "mean_phi", "mean_theta", "var_pulse", "mean_pulse", "eig1", "eig2", "eig3",
];

const N1: usize = 0;
const MEAN_R1: usize = 3;
const MEAN_ECHO: usize = 6;
const VAR_ECHO: usize = 7;
const MEAN_R: usize = 8;
const MEAN_PHI: usize = 9;
const MEAN_THETA: usize = 10;
const VAR_PULSE: usize = 11;
const MEAN_PULSE: usize = 12;
const EIG1: usize = 13;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("cannot compute statistics of an empty set")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: [f64; FEATURE_COUNT],
    mask: [bool; FEATURE_COUNT],
}

impl FeatureVector {
    /// All-zero vector with every component masked.
    pub fn masked() -> Self {
        Self {
            values: [0.0; FEATURE_COUNT],
            mask: [true; FEATURE_COUNT],
        }
    }

    /// Builds a vector from raw parts. Masked components are forced to zero.
    pub fn from_parts(mut values: [f64; FEATURE_COUNT], mask: [bool; FEATURE_COUNT]) -> Self {
        for (v, m) in values.iter_mut().zip(mask) {
            if m {
                *v = 0.0;
            }
        }
        Self { values, mask }
    }

    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.values
    }

    pub fn mask(&self) -> &[bool; FEATURE_COUNT] {
        &self.mask
    }

    /// Value of 1-based slot `slot` (1..=16).
    pub fn slot(&self, slot: usize) -> f64 {
        self.values[slot - 1]
    }

    pub fn is_masked(&self, slot: usize) -> bool {
        self.mask[slot - 1]
    }

    fn set(&mut self, idx: usize, value: Option<f64>) {
        match value {
            Some(v) => {
                self.values[idx] = v;
                self.mask[idx] = false;
            }
            None => {
                self.values[idx] = 0.0;
                self.mask[idx] = true;
            }
        }
    }
}

/// How slots f14..f16 are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMode {
    /// Eigenvalues of the joint 3x3 covariance of (x, y, z), descending.
    #[default]
    JointCovariance,
    /// Per-axis variances var(x), var(y), var(z), in axis order.
    PerAxisVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub roi: RoiBounds,
    /// When false the whole cloud is used (ablation).
    pub apply_roi: bool,
    pub eigen_mode: EigenMode,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            roi: RoiBounds::default(),
            apply_roi: true,
            eigen_mode: EigenMode::default(),
        }
    }
}

impl FeatureConfig {
    pub fn with_roi(roi: RoiBounds) -> Self {
        Self {
            roi,
            ..Self::default()
        }
    }
}

pub fn echo_counts(frame: &Frame) -> [usize; MAX_ECHOES as usize] {
    let mut counts = [0usize; MAX_ECHOES as usize];
    for p in &frame.points {
        counts[(p.echo() - 1) as usize] += 1;
    }
    counts
}

/// Mean and population variance (1/n).
pub fn attribute_mean_var(values: &[f64]) -> Result<(f64, f64), FeatureError> {
    mean_var(values.iter().copied()).ok_or(FeatureError::EmptyInput)
}

fn mean_var<I>(values: I) -> Option<(f64, f64)>
where
    I: Iterator<Item = f64> + Clone,
{
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        sum += v;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    Some((mean, var))
}

fn mean_of<I: Iterator<Item = f64>>(values: I) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean range of the points carrying echo number `t`; `None` when there are
/// none.
pub fn mean_range_per_echo(frame: &Frame, t: u8) -> Option<f64> {
    mean_of(frame.points.iter().filter(|p| p.echo() == t).map(Point::r))
}

fn covariance(points: &[Point]) -> Option<Matrix3<f64>> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let (mut mx, mut my, mut mz) = (0.0, 0.0, 0.0);
    for p in points {
        mx += p.x();
        my += p.y();
        mz += p.z();
    }
    mx /= n;
    my /= n;
    mz /= n;
    let mut c = [0.0f64; 6];
    for p in points {
        let (dx, dy, dz) = (p.x() - mx, p.y() - my, p.z() - mz);
        c[0] += dx * dx;
        c[1] += dx * dy;
        c[2] += dx * dz;
        c[3] += dy * dy;
        c[4] += dy * dz;
        c[5] += dz * dz;
    }
    for v in &mut c {
        *v /= n;
    }
    Some(Matrix3::new(
        c[0], c[1], c[2], //
        c[1], c[3], c[4], //
        c[2], c[4], c[5],
    ))
}

/// Eigenvalues of the population covariance of (x, y, z), sorted descending
/// and clamped at zero. `None` for an empty frame.
pub fn covariance_eigenvalues(frame: &Frame) -> Option<[f64; 3]> {
    let cov = covariance(&frame.points)?;
    let eig = SymmetricEigen::new(cov).eigenvalues;
    let mut ev = [eig[0].max(0.0), eig[1].max(0.0), eig[2].max(0.0)];
    ev.sort_by(|a, b| b.total_cmp(a));
    Some(ev)
}

fn axis_variances(frame: &Frame) -> Option<[f64; 3]> {
    let cov = covariance(&frame.points)?;
    Some([cov[(0, 0)], cov[(1, 1)], cov[(2, 2)]])
}

/// ROI-filters `frame` with `roi` and computes all sixteen features.
pub fn extract_features(frame: &Frame, roi: &RoiBounds) -> FeatureVector {
    extract_features_with(frame, &FeatureConfig::with_roi(*roi))
}

pub fn extract_features_with(frame: &Frame, config: &FeatureConfig) -> FeatureVector {
    let filtered;
    let frame = if config.apply_roi {
        filtered = roi_filter(frame, &config.roi);
        &filtered
    } else {
        frame
    };

    let mut fv = FeatureVector::masked();
    if frame.is_empty() {
        return fv;
    }
    let pts = &frame.points;

    let part = partition_by_echo(frame);
    for t in 1..=MAX_ECHOES {
        let idx = (t - 1) as usize;
        let subset = part.echo(t);
        fv.set(N1 + idx, Some(subset.len() as f64));
        fv.set(MEAN_R1 + idx, mean_of(subset.iter().map(Point::r)));
    }

    let echo = mean_var(pts.iter().map(|p| f64::from(p.echo())));
    fv.set(MEAN_ECHO, echo.map(|(m, _)| m));
    fv.set(VAR_ECHO, echo.map(|(_, v)| v));

    fv.set(MEAN_R, mean_of(pts.iter().map(Point::r)));
    fv.set(MEAN_PHI, mean_of(pts.iter().map(Point::phi)));
    fv.set(MEAN_THETA, mean_of(pts.iter().map(Point::theta)));

    let pulse = mean_var(pts.iter().map(Point::pulse));
    fv.set(VAR_PULSE, pulse.map(|(_, v)| v));
    fv.set(MEAN_PULSE, pulse.map(|(m, _)| m));

    let eig = match config.eigen_mode {
        EigenMode::JointCovariance => covariance_eigenvalues(frame),
        EigenMode::PerAxisVariance => axis_variances(frame),
    };
    for i in 0..3 {
        fv.set(EIG1 + i, eig.map(|e| e[i]));
    }
    fv
}

/// Extracts features for many frames in parallel. Output order matches input
/// order and does not depend on the number of worker threads.
pub fn extract_batch(frames: &[Frame], config: &FeatureConfig) -> Vec<FeatureVector> {
    frames.par_iter().map(|f| extract_features_with(f, config)).collect()
}
