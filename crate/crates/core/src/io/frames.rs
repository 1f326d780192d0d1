//! Binary frame dataset file.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size      field
//! 0       5         magic "LWPC1"
//! 5       1         pulse kind (0 intensity, 1 echo pulse width)
//! 6       1         max echoes (2 or 3)
//! 7       1         reserved, 0
//! 8       8         frame count F (u64)
//! 16      8 * F     point count of each frame (u64)
//! ...               F frame blocks
//! ```
//!
//! A frame block with n points:
//!
//! ```text
//! 8         k (u64)
//! 1         label (0 absent, 1 clear, 2 rain, 3 fog)
//! 8         visibility in m (f64, NaN when absent)
//! 8         rainfall rate in mm/h (f64, NaN when absent)
//! 4 + len   scenario id: byte length (u32) then UTF-8
//! 8n each   x, y, z, r, theta, phi columns (f64)
//! n         echo column (u8)
//! 8n        pulse column (f64)
//! 4n        object id column (u32, 0xFFFFFFFF for none)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::IoError;
use crate::cloud::{Frame, GroundTruth, Point, PulseKind, SensorDescriptor, WeatherLabel};
use crate::sim::Sample;

pub const FRAME_MAGIC: &[u8; 5] = b"LWPC1";
const HEADER_LEN: usize = 16;
const NO_OBJECT: u32 = u32::MAX;

/// A frame with its optional ground truth and scenario id.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: Frame,
    pub truth: Option<GroundTruth>,
    pub scenario_id: String,
}

impl From<Sample> for FrameRecord {
    fn from(s: Sample) -> Self {
        Self { frame: s.frame, truth: Some(s.truth), scenario_id: s.scenario_id }
    }
}

/// Contents of a dataset file.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFile {
    pub sensor: SensorDescriptor,
    pub records: Vec<FrameRecord>,
}

fn pulse_code(kind: PulseKind) -> u8 {
    match kind {
        PulseKind::Intensity => 0,
        PulseKind::EchoPulseWidth => 1,
    }
}

/// Serializes records. Every frame must carry `sensor`.
pub fn encode_frames(sensor: SensorDescriptor, records: &[FrameRecord]) -> Result<Vec<u8>, IoError> {
    if records.iter().any(|r| r.frame.sensor != sensor) {
        return Err(IoError::MixedSensors);
    }
    let mut out = Vec::new();
    out.extend_from_slice(FRAME_MAGIC);
    out.push(pulse_code(sensor.pulse_kind));
    out.push(sensor.max_echoes());
    out.push(0);
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for r in records {
        out.extend_from_slice(&(r.frame.points.len() as u64).to_le_bytes());
    }
    for r in records {
        let pts = &r.frame.points;
        out.extend_from_slice(&r.frame.k.to_le_bytes());
        out.push(r.truth.map_or(0, |t| t.label().number()));
        let vis = r.truth.and_then(|t| t.visibility()).unwrap_or(f64::NAN);
        let rain = r.truth.and_then(|t| t.rainfall_rate()).unwrap_or(f64::NAN);
        out.extend_from_slice(&vis.to_le_bytes());
        out.extend_from_slice(&rain.to_le_bytes());
        let id = r.scenario_id.as_bytes();
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id);
        let columns: [fn(&Point) -> f64; 6] = [Point::x, Point::y, Point::z, Point::r, Point::theta, Point::phi];
        for col in columns {
            for p in pts {
                out.extend_from_slice(&col(p).to_le_bytes());
            }
        }
        out.extend(pts.iter().map(Point::echo));
        for p in pts {
            out.extend_from_slice(&p.pulse().to_le_bytes());
        }
        for p in pts {
            out.extend_from_slice(&p.object().unwrap_or(NO_OBJECT).to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or(IoError::Truncated {
            expected: self.pos.saturating_add(n),
            actual: self.data.len(),
        })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, IoError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_column(&mut self, n: usize) -> Result<Vec<f64>, IoError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.corrupt("point count overflows"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn corrupt(&self, reason: impl Into<String>) -> IoError {
        IoError::Corrupt { offset: self.pos, reason: reason.into() }
    }
}

fn optional(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

pub fn decode_frames(data: &[u8]) -> Result<FrameFile, IoError> {
    if data.len() < FRAME_MAGIC.len() || &data[..FRAME_MAGIC.len()] != FRAME_MAGIC {
        if data.len() < FRAME_MAGIC.len() && FRAME_MAGIC.starts_with(data) {
            return Err(IoError::Truncated { expected: HEADER_LEN, actual: data.len() });
        }
        return Err(IoError::BadMagic);
    }
    let mut c = Cursor { data, pos: FRAME_MAGIC.len() };
    let pulse_kind = match c.u8()? {
        0 => PulseKind::Intensity,
        1 => PulseKind::EchoPulseWidth,
        other => return Err(IoError::Corrupt { offset: 5, reason: format!("unknown pulse kind {other}") }),
    };
    let max_echoes = c.u8()?;
    let sensor = SensorDescriptor::new(pulse_kind, max_echoes)
        .map_err(|e| IoError::Corrupt { offset: 6, reason: e.to_string() })?;
    c.u8()?;
    let frame_count = c.u64()?;
    let index_len = frame_count.checked_mul(8).and_then(|n| usize::try_from(n).ok()).ok_or_else(|| {
        IoError::Corrupt { offset: 8, reason: format!("frame count {frame_count} too large") }
    })?;
    if HEADER_LEN.saturating_add(index_len) > data.len() {
        return Err(IoError::Truncated { expected: HEADER_LEN.saturating_add(index_len), actual: data.len() });
    }
    let mut counts = Vec::with_capacity(frame_count as usize);
    for _ in 0..frame_count {
        let offset = c.pos;
        let n = usize::try_from(c.u64()?)
            .map_err(|_| IoError::Corrupt { offset, reason: "point count too large".into() })?;
        counts.push(n);
    }

    let mut records = Vec::with_capacity(counts.len());
    for n in counts {
        let k = c.u64()?;
        let label_offset = c.pos;
        let label_code = c.u8()?;
        let visibility = optional(c.f64()?);
        let rainfall = optional(c.f64()?);
        let truth = match label_code {
            0 => None,
            code => {
                let label = WeatherLabel::from_number(code).ok_or(IoError::Corrupt {
                    offset: label_offset,
                    reason: format!("unknown label {code}"),
                })?;
                Some(GroundTruth::new(label, visibility, rainfall).map_err(|e| IoError::Corrupt {
                    offset: label_offset,
                    reason: e.to_string(),
                })?)
            }
        };
        let id_len = c.u32()? as usize;
        let id_offset = c.pos;
        let scenario_id = String::from_utf8(c.take(id_len)?.to_vec())
            .map_err(|_| IoError::Corrupt { offset: id_offset, reason: "scenario id is not UTF-8".into() })?;
        let block_start = c.pos;
        let x = c.f64_column(n)?;
        let y = c.f64_column(n)?;
        let z = c.f64_column(n)?;
        let r = c.f64_column(n)?;
        let theta = c.f64_column(n)?;
        let phi = c.f64_column(n)?;
        let echo = c.take(n)?.to_vec();
        let pulse = c.f64_column(n)?;
        let object_bytes = c.take(n.checked_mul(4).ok_or_else(|| c.corrupt("point count overflows"))?)?;
        let mut points = Vec::with_capacity(n);
        for (i, ob) in object_bytes.chunks_exact(4).enumerate() {
            let object = match u32::from_le_bytes(ob.try_into().unwrap()) {
                NO_OBJECT => None,
                id => Some(id),
            };
            let p = Point::from_parts(x[i], y[i], z[i], r[i], theta[i], phi[i], echo[i], pulse[i], object)
                .map_err(|source| IoError::InvalidPoint { offset: block_start + 8 * i, source })?;
            points.push(p);
        }
        records.push(FrameRecord { frame: Frame::new(k, sensor, points), truth, scenario_id });
    }
    if c.pos != data.len() {
        return Err(IoError::Corrupt {
            offset: c.pos,
            reason: format!("{} trailing bytes after the declared frames", data.len() - c.pos),
        });
    }
    Ok(FrameFile { sensor, records })
}

pub fn write_frames(path: impl AsRef<Path>, sensor: SensorDescriptor, records: &[FrameRecord]) -> Result<(), IoError> {
    fs::write(path, encode_frames(sensor, records)?)?;
    Ok(())
}

pub fn read_frames(path: impl AsRef<Path>) -> Result<FrameFile, IoError> {
    decode_frames(&fs::read(path)?)
}

/// One CSV row per point: `k,x,y,z,r,theta,phi,echo,pulse`.
pub fn write_points_csv<W: Write>(out: W, frames: &[Frame]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "x", "y", "z", "r", "theta", "phi", "echo", "pulse"])?;
    for f in frames {
        for p in &f.points {
            w.write_record(&[
                f.k.to_string(),
                p.x().to_string(),
                p.y().to_string(),
                p.z().to_string(),
                p.r().to_string(),
                p.theta().to_string(),
                p.phi().to_string(),
                p.echo().to_string(),
                p.pulse().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_records(n: usize, seed: u64) -> Vec<FrameRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sensor = SensorDescriptor::three_echo();
        (0..n)
            .map(|i| {
                let count = rng.random_range(0..40);
                let points = (0..count)
                    .map(|_| {
                        Point::new(
                            rng.random_range(-30.0..30.0),
                            rng.random_range(-5.0..5.0),
                            rng.random_range(-2.0..2.0),
                            rng.random_range(1..=3),
                            rng.random_range(0.0..200.0),
                        )
                        .unwrap()
                        .with_object(if rng.random_bool(0.5) { Some(rng.random_range(0..9)) } else { None })
                    })
                    .collect();
                let truth = match i % 4 {
                    0 => None,
                    1 => Some(GroundTruth::clear()),
                    2 => Some(GroundTruth::new(WeatherLabel::Rain, None, Some(55.0)).unwrap()),
                    _ => Some(GroundTruth::new(WeatherLabel::Fog, Some(rng.random_range(20.0..60.0)), None).unwrap()),
                };
                FrameRecord { frame: Frame::new(i as u64 * 3, sensor, points), truth, scenario_id: format!("scene-{}", i % 3) }
            })
            .collect()
    }

    fn bits(f: &Frame) -> Vec<[u64; 8]> {
        f.points
            .iter()
            .map(|p| {
                [
                    p.x().to_bits(),
                    p.y().to_bits(),
                    p.z().to_bits(),
                    p.r().to_bits(),
                    p.theta().to_bits(),
                    p.phi().to_bits(),
                    p.pulse().to_bits(),
                    p.echo() as u64 | (p.object().map_or(u64::MAX, u64::from) << 8),
                ]
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let records = random_records(100, 3);
        let bytes = encode_frames(SensorDescriptor::three_echo(), &records).unwrap();
        let back = decode_frames(&bytes).unwrap();
        assert_eq!(back.records.len(), 100);
        for (a, b) in records.iter().zip(&back.records) {
            assert_eq!(bits(&a.frame), bits(&b.frame));
            assert_eq!(a.truth, b.truth);
            assert_eq!(a.scenario_id, b.scenario_id);
            assert_eq!(a.frame.k, b.frame.k);
        }
    }

    #[test]
    fn truncation_names_lengths() {
        let bytes = encode_frames(SensorDescriptor::three_echo(), &random_records(5, 1)).unwrap();
        for cut in [3, 10, 30, bytes.len() - 1] {
            match decode_frames(&bytes[..cut]) {
                Err(IoError::Truncated { expected, actual }) => {
                    assert_eq!(actual, cut);
                    assert!(expected > actual);
                    let msg = IoError::Truncated { expected, actual }.to_string();
                    assert!(msg.contains(&expected.to_string()) && msg.contains(&actual.to_string()));
                }
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn corrupt_inputs() {
        let mut bytes = encode_frames(SensorDescriptor::dual_return(), &[]).unwrap();
        assert!(decode_frames(&bytes).unwrap().records.is_empty());
        bytes[0] = b'X';
        assert!(matches!(decode_frames(&bytes), Err(IoError::BadMagic)));
        let mut bytes = encode_frames(SensorDescriptor::three_echo(), &random_records(2, 5)).unwrap();
        bytes.push(0);
        assert!(matches!(decode_frames(&bytes), Err(IoError::Corrupt { .. })));
        let mut bytes = encode_frames(SensorDescriptor::three_echo(), &[]).unwrap();
        bytes[6] = 7;
        assert!(matches!(decode_frames(&bytes), Err(IoError::Corrupt { offset: 6, .. })));
    }

    #[test]
    fn mixed_sensors_rejected() {
        let mut records = random_records(2, 2);
        records[1].frame.sensor = SensorDescriptor::dual_return();
        assert!(matches!(encode_frames(SensorDescriptor::three_echo(), &records), Err(IoError::MixedSensors)));
    }

    #[test]
    fn singleton_csv() {
        let f = Frame::new(7, SensorDescriptor::default(), vec![Point::new(5.0, 0.0, 0.0, 1, 10.0).unwrap()]);
        let mut out = Vec::new();
        write_points_csv(&mut out, &[f]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "k,x,y,z,r,theta,phi,echo,pulse");
        assert!(lines[1].starts_with("7,5,0,0,5,"));
    }
}
