//! Point and frame data model, coordinate conversion, ROI gating and echo
//! partitioning.
//!
//! Angles follow one convention throughout the crate: `theta` is the
//! elevation above the sensor's xy-plane and `phi` the azimuth measured from
//! +x towards +y.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum echo number any supported sensor reports.
pub const MAX_ECHOES: u8 = 3;

/// Tolerance used when checking that a stored range matches its coordinates.
pub const RANGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("echo number {0} outside 1..=3")]
    InvalidEcho(u8),
    #[error("pulse measure must be finite and non-negative, got {0}")]
    InvalidPulse(f64),
    #[error("non-finite coordinate ({0}, {1}, {2})")]
    NonFiniteCoordinate(f64, f64, f64),
    #[error("range {stored} disagrees with coordinates (expected {expected})")]
    RangeMismatch { stored: f64, expected: f64 },
    #[error("invalid ROI bounds: {0}")]
    InvalidRoi(String),
    #[error("inconsistent ground truth: {0}")]
    InvalidGroundTruth(String),
    #[error("max echoes must be 2 or 3, got {0}")]
    InvalidMaxEchoes(u8),
}

/// Which reflected-energy measure a sensor reports in the pulse channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    /// Amplitude-based intensity.
    Intensity,
    /// Echo pulse width.
    EchoPulseWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSensorDescriptor")]
pub struct SensorDescriptor {
    pub pulse_kind: PulseKind,
    max_echoes: u8,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensorDescriptor {
    pulse_kind: PulseKind,
    max_echoes: u8,
}

impl TryFrom<RawSensorDescriptor> for SensorDescriptor {
    type Error = CloudError;

    fn try_from(raw: RawSensorDescriptor) -> Result<Self, Self::Error> {
        Self::new(raw.pulse_kind, raw.max_echoes)
    }
}

impl SensorDescriptor {
    pub fn new(pulse_kind: PulseKind, max_echoes: u8) -> Result<Self, CloudError> {
        if !(2..=MAX_ECHOES).contains(&max_echoes) {
            return Err(CloudError::InvalidMaxEchoes(max_echoes));
        }
        Ok(Self {
            pulse_kind,
            max_echoes,
        })
    }

    /// Three echoes ordered by distance, pulse width channel.
    pub fn three_echo() -> Self {
        Self {
            pulse_kind: PulseKind::EchoPulseWidth,
            max_echoes: 3,
        }
    }

    /// Strongest + last return pair, intensity channel.
    pub fn dual_return() -> Self {
        Self {
            pulse_kind: PulseKind::Intensity,
            max_echoes: 2,
        }
    }

    pub fn max_echoes(&self) -> u8 {
        self.max_echoes
    }
}

impl Default for SensorDescriptor {
    fn default() -> Self {
        Self::three_echo()
    }
}

/// Identifier of a scene object a return was reflected from.
pub type ObjectId = u32;

/// One lidar return.
///
/// Carries both coordinate sets; the spherical set is always derived from the
/// cartesian one on construction so the two never disagree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    x: f64,
    y: f64,
    z: f64,
    r: f64,
    theta: f64,
    phi: f64,
    echo: u8,
    pulse: f64,
    object: Option<ObjectId>,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, echo: u8, pulse: f64) -> Result<Self, CloudError> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(CloudError::NonFiniteCoordinate(x, y, z));
        }
        if !(1..=MAX_ECHOES).contains(&echo) {
            return Err(CloudError::InvalidEcho(echo));
        }
        if !(pulse.is_finite() && pulse >= 0.0) {
            return Err(CloudError::InvalidPulse(pulse));
        }
        let (r, theta, phi) = spherical_from_cartesian(x, y, z);
        Ok(Self {
            x,
            y,
            z,
            r,
            theta,
            phi,
            echo,
            pulse,
            object: None,
        })
    }

    /// Rebuilds a point from all stored attributes, checking that the range
    /// agrees with the coordinates. Used when loading persisted frames so the
    /// stored spherical values are kept bit-for-bit.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        x: f64,
        y: f64,
        z: f64,
        r: f64,
        theta: f64,
        phi: f64,
        echo: u8,
        pulse: f64,
        object: Option<ObjectId>,
    ) -> Result<Self, CloudError> {
        let mut p = Self::new(x, y, z, echo, pulse)?;
        if !r.is_finite() || (r - p.r).abs() > RANGE_TOLERANCE {
            return Err(CloudError::RangeMismatch {
                stored: r,
                expected: p.r,
            });
        }
        p.r = r;
        p.theta = theta;
        p.phi = phi;
        p.object = object;
        Ok(p)
    }

    pub fn with_object(mut self, object: Option<ObjectId>) -> Self {
        self.object = object;
        self
    }

    pub fn with_echo(self, echo: u8) -> Result<Self, CloudError> {
        if !(1..=MAX_ECHOES).contains(&echo) {
            return Err(CloudError::InvalidEcho(echo));
        }
        Ok(Self { echo, ..self })
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    /// Elevation in radians.
    pub fn theta(&self) -> f64 {
        self.theta
    }
    /// Azimuth in radians.
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn echo(&self) -> u8 {
        self.echo
    }
    pub fn pulse(&self) -> f64 {
        self.pulse
    }
    /// Object this return was reflected from, when known (synthetic data).
    pub fn object(&self) -> Option<ObjectId> {
        self.object
    }
}

/// Converts cartesian coordinates to `(r, theta, phi)`.
///
/// The origin maps to all zeros.
pub fn spherical_from_cartesian(x: f64, y: f64, z: f64) -> (f64, f64, f64) {
    let r = (x * x + y * y + z * z).sqrt();
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let theta = (z / r).clamp(-1.0, 1.0).asin();
    let phi = y.atan2(x);
    (r, theta, phi)
}

pub fn cartesian_from_spherical(r: f64, theta: f64, phi: f64) -> (f64, f64, f64) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    (r * ct * cp, r * ct * sp, r * st)
}

/// One full scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub k: u64,
    pub points: Vec<Point>,
    pub sensor: SensorDescriptor,
}

impl Frame {
    pub fn new(k: u64, sensor: SensorDescriptor, points: Vec<Point>) -> Self {
        Self { k, points, sensor }
    }

    pub fn empty(k: u64, sensor: SensorDescriptor) -> Self {
        Self::new(k, sensor, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Near-range ego-lane gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRoiBounds")]
pub struct RoiBounds {
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoiBounds {
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl TryFrom<RawRoiBounds> for RoiBounds {
    type Error = CloudError;

    fn try_from(raw: RawRoiBounds) -> Result<Self, Self::Error> {
        Self::new(raw.x_max, raw.y_min, raw.y_max)
    }
}

impl RoiBounds {
    pub const DEFAULT_X_MAX: f64 = 20.0;
    pub const DEFAULT_Y_MIN: f64 = -1.5;
    pub const DEFAULT_Y_MAX: f64 = 1.5;

    pub fn new(x_max: f64, y_min: f64, y_max: f64) -> Result<Self, CloudError> {
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(CloudError::InvalidRoi(format!("x_max must be > 0, got {x_max}")));
        }
        if !(y_min.is_finite() && y_max.is_finite() && y_min < y_max) {
            return Err(CloudError::InvalidRoi(format!(
                "need y_min < y_max, got [{y_min}, {y_max}]"
            )));
        }
        Ok(Self { x_max, y_min, y_max })
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x <= self.x_max && self.y_min <= p.y && p.y <= self.y_max
    }
}

impl Default for RoiBounds {
    fn default() -> Self {
        Self {
            x_max: Self::DEFAULT_X_MAX,
            y_min: Self::DEFAULT_Y_MIN,
            y_max: Self::DEFAULT_Y_MAX,
        }
    }
}

/// Keeps the points inside `roi`, preserving order, frame index and sensor.
pub fn roi_filter(frame: &Frame, roi: &RoiBounds) -> Frame {
    Frame {
        k: frame.k,
        sensor: frame.sensor,
        points: frame.points.iter().filter(|p| roi.contains(p)).copied().collect(),
    }
}

/// Points of one frame split by echo number. Index 0 holds echo 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EchoPartition {
    sets: [Vec<Point>; MAX_ECHOES as usize],
}

impl EchoPartition {
    /// Points with echo number `t` (1-based). Out-of-range `t` yields an
    /// empty slice.
    pub fn echo(&self, t: u8) -> &[Point] {
        match t {
            1..=MAX_ECHOES => &self.sets[(t - 1) as usize],
            _ => &[],
        }
    }

    pub fn counts(&self) -> [usize; MAX_ECHOES as usize] {
        [self.sets[0].len(), self.sets[1].len(), self.sets[2].len()]
    }
}

pub fn partition_by_echo(frame: &Frame) -> EchoPartition {
    let mut part = EchoPartition::default();
    for p in &frame.points {
        part.sets[(p.echo - 1) as usize].push(*p);
    }
    part
}

/// Weather class. Discriminants follow the class numbering used in reports
/// (1 clear, 2 rain, 3 fog).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherLabel {
    Clear = 1,
    Rain = 2,
    Fog = 3,
}

impl WeatherLabel {
    pub const ALL: [WeatherLabel; 3] = [WeatherLabel::Clear, WeatherLabel::Rain, WeatherLabel::Fog];

    pub fn number(self) -> u8 {
        self as u8
    }

    /// Zero-based class index.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Self::Clear),
            2 => Some(Self::Rain),
            3 => Some(Self::Fog),
            _ => None,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        u8::try_from(i + 1).ok().and_then(Self::from_number)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Clear => "clear",
            Self::Rain => "rain",
            Self::Fog => "fog",
        }
    }
}

impl std::fmt::Display for WeatherLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for WeatherLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clear" | "1" => Ok(Self::Clear),
            "rain" | "2" => Ok(Self::Rain),
            "fog" | "3" => Ok(Self::Fog),
            other => Err(format!("unknown weather label '{other}'")),
        }
    }
}

/// Meteorological ground truth attached to a recorded frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Meteorological visibility in meters.
    visibility: Option<f64>,
    /// Rainfall rate in mm/h.
    rainfall_rate: Option<f64>,
    label: WeatherLabel,
}

impl GroundTruth {
    pub fn new(
        label: WeatherLabel,
        visibility: Option<f64>,
        rainfall_rate: Option<f64>,
    ) -> Result<Self, CloudError> {
        match label {
            WeatherLabel::Fog if visibility.is_none() => {
                return Err(CloudError::InvalidGroundTruth("fog requires a visibility".into()))
            }
            WeatherLabel::Rain if rainfall_rate.is_none() => {
                return Err(CloudError::InvalidGroundTruth("rain requires a rainfall rate".into()))
            }
            _ => {}
        }
        if visibility.is_some_and(|v| !(v.is_finite() && v > 0.0)) {
            return Err(CloudError::InvalidGroundTruth(format!(
                "visibility must be positive, got {visibility:?}"
            )));
        }
        if rainfall_rate.is_some_and(|r| !(r.is_finite() && r >= 0.0)) {
            return Err(CloudError::InvalidGroundTruth(format!(
                "rainfall rate must be non-negative, got {rainfall_rate:?}"
            )));
        }
        Ok(Self {
            visibility,
            rainfall_rate,
            label,
        })
    }

    pub fn clear() -> Self {
        Self {
            visibility: None,
            rainfall_rate: None,
            label: WeatherLabel::Clear,
        }
    }

    pub fn label(&self) -> WeatherLabel {
        self.label
    }
    pub fn visibility(&self) -> Option<f64> {
        self.visibility
    }
    pub fn rainfall_rate(&self) -> Option<f64> {
        self.rainfall_rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64, z: f64, echo: u8) -> Point {
        Point::new(x, y, z, echo, 1.0).unwrap()
    }

    #[test]
    fn origin_and_forward_axis() {
        assert_eq!(spherical_from_cartesian(0.0, 0.0, 0.0), (0.0, 0.0, 0.0));
        assert_eq!(spherical_from_cartesian(1.0, 0.0, 0.0), (1.0, 0.0, 0.0));
        let (r, theta, phi) = spherical_from_cartesian(0.0, 2.0, 0.0);
        assert_eq!(r, 2.0);
        assert_eq!(theta, 0.0);
        assert!((phi - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn random_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (x, y, z) = (
                rng.random_range(-100.0..100.0),
                rng.random_range(-100.0..100.0),
                rng.random_range(-100.0..100.0),
            );
            let (r, t, p) = spherical_from_cartesian(x, y, z);
            let (x2, y2, z2) = cartesian_from_spherical(r, t, p);
            assert!((x - x2).abs() < 1e-9 && (y - y2).abs() < 1e-9 && (z - z2).abs() < 1e-9);
        }
    }

    #[test]
    fn point_validation() {
        assert_eq!(Point::new(1.0, 0.0, 0.0, 0, 1.0), Err(CloudError::InvalidEcho(0)));
        assert_eq!(Point::new(1.0, 0.0, 0.0, 4, 1.0), Err(CloudError::InvalidEcho(4)));
        assert!(matches!(Point::new(1.0, 0.0, 0.0, 1, -0.5), Err(CloudError::InvalidPulse(_))));
        assert!(Point::new(f64::NAN, 0.0, 0.0, 1, 0.0).is_err());
        let p = Point::new(3.0, 4.0, 0.0, 2, 0.0).unwrap();
        assert_eq!(p.r(), 5.0);
        assert!(Point::from_parts(3.0, 4.0, 0.0, 5.1, 0.0, 0.0, 1, 0.0, None).is_err());
    }

    #[test]
    fn roi_keeps_only_inside_point() {
        let f = Frame::new(
            3,
            SensorDescriptor::default(),
            vec![pt(5.0, 0.0, 0.0, 1), pt(25.0, 0.0, 0.0, 1), pt(5.0, 2.0, 0.0, 1)],
        );
        let out = roi_filter(&f, &RoiBounds::default());
        assert_eq!(out.k, 3);
        assert_eq!(out.points, vec![pt(5.0, 0.0, 0.0, 1)]);
        let empty = Frame::empty(0, SensorDescriptor::default());
        assert!(roi_filter(&empty, &RoiBounds::default()).is_empty());
    }

    #[test]
    fn roi_bounds_are_inclusive() {
        let roi = RoiBounds::default();
        assert!(roi.contains(&pt(20.0, 1.5, 0.0, 1)));
        assert!(roi.contains(&pt(-3.0, -1.5, 0.0, 1)));
        assert!(!roi.contains(&pt(20.000001, 0.0, 0.0, 1)));
    }

    #[test]
    fn roi_rejects_bad_bounds() {
        assert!(RoiBounds::new(0.0, -1.0, 1.0).is_err());
        assert!(RoiBounds::new(10.0, 1.0, 1.0).is_err());
        assert!(RoiBounds::new(10.0, -1.0, 1.0).is_ok());
    }

    #[test]
    fn random_roi_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Point> = (0..10_000)
            .map(|_| {
                pt(
                    rng.random_range(-40.0..40.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(1..=3),
                )
            })
            .collect();
        let frame = Frame::new(0, SensorDescriptor::default(), points.clone());
        let roi = RoiBounds::default();
        let mut expected = Vec::new();
        for p in &points {
            if p.x() <= 20.0 && p.y() >= -1.5 && p.y() <= 1.5 {
                expected.push(*p);
            }
        }
        assert_eq!(roi_filter(&frame, &roi).points, expected);
    }

    #[test]
    fn partition_single_echo_and_empty() {
        let f = Frame::new(0, SensorDescriptor::default(), vec![pt(1.0, 0.0, 0.0, 1); 4]);
        let part = partition_by_echo(&f);
        assert_eq!(part.counts(), [4, 0, 0]);
        let empty = partition_by_echo(&Frame::empty(0, SensorDescriptor::default()));
        assert_eq!(empty.counts(), [0, 0, 0]);
        assert!(empty.echo(4).is_empty());
    }

    #[test]
    fn partition_matches_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point> = (0..500)
            .map(|i| pt(i as f64 * 0.1, 0.0, 0.0, rng.random_range(1..=3)))
            .collect();
        let mut counts = [0usize; 3];
        for p in &pts {
            counts[p.echo() as usize - 1] += 1;
        }
        let part = partition_by_echo(&Frame::new(0, SensorDescriptor::default(), pts.clone()));
        assert_eq!(part.counts(), counts);
        // order preserved within a subset
        let echo2: Vec<Point> = pts.iter().filter(|p| p.echo() == 2).copied().collect();
        assert_eq!(part.echo(2), echo2.as_slice());
    }

    #[test]
    fn ground_truth_consistency() {
        assert!(GroundTruth::new(WeatherLabel::Fog, None, None).is_err());
        assert!(GroundTruth::new(WeatherLabel::Rain, None, None).is_err());
        assert!(GroundTruth::new(WeatherLabel::Fog, Some(-1.0), None).is_err());
        assert!(GroundTruth::new(WeatherLabel::Rain, None, Some(55.0)).is_ok());
        assert_eq!(GroundTruth::clear().label(), WeatherLabel::Clear);
    }

    #[test]
    fn label_numbering() {
        for l in WeatherLabel::ALL {
            assert_eq!(WeatherLabel::from_number(l.number()), Some(l));
            assert_eq!(WeatherLabel::from_index(l.index()), Some(l));
            assert_eq!(l.name().parse::<WeatherLabel>().unwrap(), l);
        }
        assert_eq!(WeatherLabel::Clear.number(), 1);
        assert_eq!(WeatherLabel::Fog.number(), 3);
    }

    fn arb_point() -> impl Strategy<Value = Point> {
        (-50.0..50.0f64, -10.0..10.0f64, -5.0..5.0f64, 1u8..=3, 0.0..100.0f64)
            .prop_map(|(x, y, z, e, p)| Point::new(x, y, z, e, p).unwrap())
    }

    proptest! {
        #[test]
        fn roi_filter_is_idempotent(points in prop::collection::vec(arb_point(), 0..200)) {
            let f = Frame::new(1, SensorDescriptor::default(), points);
            let roi = RoiBounds::default();
            let once = roi_filter(&f, &roi);
            prop_assert_eq!(roi_filter(&once, &roi), once);
        }

        #[test]
        fn partition_covers_frame(points in prop::collection::vec(arb_point(), 0..200)) {
            let f = Frame::new(1, SensorDescriptor::default(), points);
            let c = partition_by_echo(&f).counts();
            prop_assert_eq!(c[0] + c[1] + c[2], f.len());
        }

        #[test]
        fn spherical_round_trip(r in 1e-3..200.0f64, theta in -1.5..1.5f64, phi in -3.1..3.1f64) {
            let (x, y, z) = cartesian_from_spherical(r, theta, phi);
            let (r2, t2, p2) = spherical_from_cartesian(x, y, z);
            let (x2, y2, z2) = cartesian_from_spherical(r2, t2, p2);
            prop_assert!((x - x2).abs() < 1e-9 && (y - y2).abs() < 1e-9 && (z - z2).abs() < 1e-9);
            prop_assert!((r - r2).abs() < 1e-9);
        }
    }
}
