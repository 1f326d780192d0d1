//! Weather classification (clear / rain / fog) from multi-echo lidar point
//! clouds.
//!
//! The pipeline: [`cloud`] frames are gated to a near-range region of
//! interest, summarised into sixteen [`features`], and classified with kNN or
//! SVM models from [`classify`]. [`metrics`] evaluates predictions and object
//! point density. [`sim`] generates labeled synthetic data and [`io`] holds
//! the on-disk formats.

pub mod classify;
pub mod cloud;
pub mod features;
pub mod io;
pub mod metrics;
pub mod sim;

pub use cloud::{
    cartesian_from_spherical, partition_by_echo, roi_filter, spherical_from_cartesian, Frame, GroundTruth,
    ObjectId, Point, PulseKind, RoiBounds, SensorDescriptor, WeatherLabel,
};
pub use features::{extract_features, extract_features_with, FeatureConfig, FeatureVector, FEATURE_COUNT};
