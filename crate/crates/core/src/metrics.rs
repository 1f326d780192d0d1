//! Classification metrics and object point density.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::cloud::{Frame, ObjectId, WeatherLabel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{predictions} predictions but {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("label {label} outside 0..{class_count}")]
    LabelOutOfRange { label: usize, class_count: usize },
    #[error("class count must be positive")]
    NoClasses,
    #[error("clear-condition reference must be positive, got {0}")]
    InvalidReference(f64),
    #[error("no values to summarise")]
    Empty,
}

/// Counts indexed `[truth][prediction]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

pub fn confusion_matrix(
    predictions: &[usize],
    truths: &[usize],
    class_count: usize,
) -> Result<ConfusionMatrix, MetricsError> {
    if class_count == 0 {
        return Err(MetricsError::NoClasses);
    }
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch { predictions: predictions.len(), truths: truths.len() });
    }
    let mut counts = vec![vec![0u64; class_count]; class_count];
    for (&p, &t) in predictions.iter().zip(truths) {
        for label in [p, t] {
            if label >= class_count {
                return Err(MetricsError::LabelOutOfRange { label, class_count });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Confusion matrix over the three weather classes.
pub fn weather_confusion(predictions: &[WeatherLabel], truths: &[WeatherLabel]) -> Result<ConfusionMatrix, MetricsError> {
    let p: Vec<usize> = predictions.iter().map(|l| l.index()).collect();
    let t: Vec<usize> = truths.iter().map(|l| l.index()).collect();
    confusion_matrix(&p, &t, WeatherLabel::ALL.len())
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let n = counts.len();
        if n == 0 {
            return Err(MetricsError::NoClasses);
        }
        if counts.iter().any(|row| row.len() != n) {
            return Err(MetricsError::LengthMismatch { predictions: n, truths: counts.len() });
        }
        Ok(Self { counts })
    }

    pub fn class_count(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Per-class figures. Rates are percentages; `None` marks a class without
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    /// 1-based class number.
    pub class: usize,
    pub samples: u64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub tpr: Option<f64>,
    /// One-vs-rest false positive rate `FP / (FP + TN)`.
    pub fpr: Option<f64>,
    /// Miss rate `FN / (TP + FN)` = `100 - TPR`, the alternative reading of
    /// a per-class FPR column.
    pub miss_rate: Option<f64>,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub classes: Vec<ClassMetrics>,
    /// Unweighted mean IoU over classes with samples.
    pub mean_iou: Option<f64>,
}

fn pct(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

pub fn class_metrics(confusion: &ConfusionMatrix) -> EvalReport {
    let n = confusion.class_count();
    let total = confusion.total();
    let mut classes = Vec::with_capacity(n);
    for c in 0..n {
        let tp = confusion.get(c, c);
        let samples: u64 = confusion.counts[c].iter().sum();
        let predicted: u64 = (0..n).map(|t| confusion.get(t, c)).sum();
        let fn_ = samples - tp;
        let fp = predicted - tp;
        let tn = total - tp - fn_ - fp;
        let present = samples > 0;
        if !present {
            log::warn!("class {} has no samples; excluded from mean IoU", c + 1);
        }
        classes.push(ClassMetrics {
            class: c + 1,
            samples,
            tp,
            fp,
            fn_,
            tn,
            tpr: pct(tp, samples),
            fpr: if present { pct(fp, fp + tn).or(Some(0.0)) } else { None },
            miss_rate: pct(fn_, samples),
            iou: if present { pct(tp, tp + fp + fn_) } else { None },
        });
    }
    let ious: Vec<f64> = classes.iter().filter_map(|c| c.iou).collect();
    let mean_iou = (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64);
    EvalReport { classes, mean_iou }
}

/// Which quantity fills the FPR column of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FprConvention {
    /// `FP / (FP + TN)` with one-vs-rest negatives.
    #[default]
    OneVsRest,
    /// `FN / (TP + FN)`; the column then complements TPR to 100.
    MissRate,
}

impl std::str::FromStr for FprConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one-vs-rest" | "ovr" => Ok(Self::OneVsRest),
            "miss-rate" | "complement" => Ok(Self::MissRate),
            other => Err(format!("unknown FPR convention '{other}'")),
        }
    }
}

/// Formats `x` with two decimals.
pub fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}

/// Thousands separators: `92708` -> `92,708`.
pub fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn opt2(x: Option<f64>) -> String {
    x.map(fmt2).unwrap_or_else(|| "--".into())
}

impl EvalReport {
    fn fpr_value(c: &ClassMetrics, conv: FprConvention) -> Option<f64> {
        match conv {
            FprConvention::OneVsRest => c.fpr,
            FprConvention::MissRate => c.miss_rate,
        }
    }

    /// Aligned text table: class, # samples, TPR, FPR, IoU, then the mean IoU.
    pub fn to_table(&self, conv: FprConvention) -> String {
        let header = ["class", "# samples", "TPR [%]", "FPR [%]", "IoU [%]"];
        let rows: Vec<[String; 5]> = self
            .classes
            .iter()
            .map(|c| {
                [
                    c.class.to_string(),
                    group_thousands(c.samples),
                    opt2(c.tpr),
                    opt2(Self::fpr_value(c, conv)),
                    opt2(c.iou),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |cells: &[&str], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  "));
        };
        line(&header, &mut out);
        let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        let _ = writeln!(out, "{}", "-".repeat(rule));
        for row in &rows {
            let cells: Vec<&str> = row.iter().map(String::as_str).collect();
            line(&cells, &mut out);
        }
        let _ = writeln!(out, "mean IoU [%]: {}", opt2(self.mean_iou));
        out
    }

    /// CSV with the table's columns plus raw counts.
    pub fn to_csv(&self, conv: FprConvention) -> String {
        let mut out = String::from("class,samples,tp,fp,fn,tn,tpr,fpr,iou\n");
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.class,
                c.samples,
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                c.tpr.map(fmt2).unwrap_or_default(),
                Self::fpr_value(c, conv).map(fmt2).unwrap_or_default(),
                c.iou.map(fmt2).unwrap_or_default(),
            );
        }
        let _ = writeln!(out, "mean,,,,,,,,{}", self.mean_iou.map(fmt2).unwrap_or_default());
        out
    }
}

/// Points on `object` in `frame` (all echoes).
pub fn object_point_count(frame: &Frame, object: ObjectId) -> usize {
    frame.points.iter().filter(|p| p.object() == Some(object)).count()
}

/// Mean point count on `object` over reference frames.
pub fn reference_mean_count(frames: &[&Frame], object: ObjectId) -> Result<f64, MetricsError> {
    if frames.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total: usize = frames.iter().map(|f| object_point_count(f, object)).sum();
    Ok(total as f64 / frames.len() as f64)
}

/// Per-frame object point count divided by `reference_mean`.
pub fn object_point_density(frames: &[&Frame], object: ObjectId, reference_mean: f64) -> Result<Vec<f64>, MetricsError> {
    if !(reference_mean.is_finite() && reference_mean > 0.0) {
        return Err(MetricsError::InvalidReference(reference_mean));
    }
    Ok(frames.iter().map(|f| object_point_count(f, object) as f64 / reference_mean).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionDensities {
    pub condition: String,
    pub densities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectDensitySeries {
    pub object: ObjectId,
    pub reference_mean: f64,
    pub conditions: Vec<ConditionDensities>,
}

impl ObjectDensitySeries {
    /// Normalises every condition group by the mean count over `reference`.
    pub fn build(
        object: ObjectId,
        reference: &[&Frame],
        groups: &[(String, Vec<&Frame>)],
    ) -> Result<Self, MetricsError> {
        let reference_mean = reference_mean_count(reference, object)?;
        let conditions = groups
            .iter()
            .map(|(name, frames)| {
                Ok(ConditionDensities {
                    condition: name.clone(),
                    densities: object_point_density(frames, object, reference_mean)?,
                })
            })
            .collect::<Result<_, MetricsError>>()?;
        Ok(Self { object, reference_mean, conditions })
    }

    /// One CSV row per condition: condition, n, median, q1, q3, whiskers,
    /// outliers (semicolon separated).
    pub fn boxplot_csv(&self) -> Result<String, MetricsError> {
        let mut out = String::from("condition,frames,median,q1,q3,whisker_low,whisker_high,outliers\n");
        for c in &self.conditions {
            let b = boxplot_stats(&c.densities)?;
            let outliers: Vec<String> = b.outliers.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                c.condition,
                c.densities.len(),
                b.median,
                b.q1,
                b.q3,
                b.whisker_low,
                b.whisker_high,
                outliers.join(";")
            );
        }
        Ok(out)
    }
}

/// Tukey box: quartiles by linear interpolation, whiskers at the most
/// extreme values within 1.5 IQR of the box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxplotStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Quantile `q` in [0, 1] of sorted data, linear interpolation between
/// order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let median = quantile_sorted(&v, 0.5);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence).collect();
    let outliers = v.iter().copied().filter(|x| *x < lo_fence || *x > hi_fence).collect();
    Ok(BoxplotStats {
        median,
        q1,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{Point, SensorDescriptor};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let labels = [0, 1, 2, 2, 1, 0, 0];
        let cm = confusion_matrix(&labels, &labels, 3).unwrap();
        for t in 0..3 {
            for p in 0..3 {
                let expected = if t == p { labels.iter().filter(|&&l| l == t).count() as u64 } else { 0 };
                assert_eq!(cm.get(t, p), expected);
            }
        }
        let r = class_metrics(&cm);
        assert!(r.classes.iter().all(|c| c.tpr == Some(100.0) && c.iou == Some(100.0) && c.fpr == Some(0.0)));
        assert_eq!(r.mean_iou, Some(100.0));
    }

    #[test]
    fn constant_prediction_fills_one_column() {
        let truths = [0, 1, 2, 1];
        let cm = confusion_matrix(&[0, 0, 0, 0], &truths, 3).unwrap();
        for t in 0..3 {
            for p in 1..3 {
                assert_eq!(cm.get(t, p), 0);
            }
        }
        assert_eq!(cm.total(), 4);
    }

    #[test]
    fn random_matrix_matches_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p: Vec<usize> = (0..500).map(|_| rng.random_range(0..3)).collect();
        let t: Vec<usize> = (0..500).map(|_| rng.random_range(0..3)).collect();
        let cm = confusion_matrix(&p, &t, 3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let n = p.iter().zip(&t).filter(|(pp, tt)| **tt == a && **pp == b).count() as u64;
                assert_eq!(cm.get(a, b), n);
            }
        }
    }

    #[test]
    fn input_errors() {
        assert!(matches!(confusion_matrix(&[0], &[0, 1], 2), Err(MetricsError::LengthMismatch { .. })));
        assert!(matches!(confusion_matrix(&[3], &[0], 2), Err(MetricsError::LabelOutOfRange { .. })));
        assert!(matches!(confusion_matrix(&[], &[], 0), Err(MetricsError::NoClasses)));
    }

    #[test]
    fn two_class_hand_values() {
        let cm = ConfusionMatrix::from_counts(vec![vec![8, 2], vec![1, 9]]).unwrap();
        let r = class_metrics(&cm);
        assert_eq!(fmt2(r.classes[0].tpr.unwrap()), "80.00");
        assert_eq!(fmt2(r.classes[0].iou.unwrap()), "72.73");
        assert_eq!(fmt2(r.classes[1].tpr.unwrap()), "90.00");
        assert_eq!(fmt2(r.classes[1].iou.unwrap()), "75.00");
        assert_eq!(fmt2(r.classes[0].fpr.unwrap()), "10.00");
        assert_eq!(fmt2(r.classes[0].miss_rate.unwrap()), "20.00");
    }

    #[test]
    fn empty_class_is_masked() {
        let cm = ConfusionMatrix::from_counts(vec![vec![5, 0, 1], vec![0, 0, 0], vec![0, 0, 4]]).unwrap();
        let r = class_metrics(&cm);
        assert_eq!(r.classes[1].iou, None);
        assert_eq!(r.classes[1].tpr, None);
        let expected = (100.0 * 5.0 / 6.0 + 100.0 * 4.0 / 5.0) / 2.0;
        assert!((r.mean_iou.unwrap() - expected).abs() < 1e-12);
        assert!(r.to_table(FprConvention::OneVsRest).contains("--"));
    }

    #[test]
    fn thousands() {
        assert_eq!(group_thousands(0), "0");
        assert_eq!(group_thousands(999), "999");
        assert_eq!(group_thousands(5558), "5,558");
        assert_eq!(group_thousands(92708), "92,708");
        assert_eq!(group_thousands(1234567), "1,234,567");
    }

    fn frame_with_object_points(n: usize, object: ObjectId) -> Frame {
        let pts = (0..n)
            .map(|i| Point::new(5.0 + i as f64 * 0.01, 0.0, 0.0, 1, 1.0).unwrap().with_object(Some(object)))
            .chain(std::iter::once(Point::new(3.0, 0.0, 0.0, 1, 1.0).unwrap()))
            .collect();
        Frame::new(0, SensorDescriptor::default(), pts)
    }

    #[test]
    fn clear_frames_normalise_to_one() {
        let frames: Vec<Frame> = [3, 5, 4, 7, 6].iter().map(|&n| frame_with_object_points(n, 2)).collect();
        let refs: Vec<&Frame> = frames.iter().collect();
        let mean = reference_mean_count(&refs, 2).unwrap();
        let d = object_point_density(&refs, 2, mean).unwrap();
        assert!((d.iter().sum::<f64>() / d.len() as f64 - 1.0).abs() < 1e-12);
        let absent = frame_with_object_points(0, 2);
        assert_eq!(object_point_density(&[&absent], 2, mean).unwrap(), vec![0.0]);
        assert!(matches!(object_point_density(&refs, 2, 0.0), Err(MetricsError::InvalidReference(_))));
    }

    #[test]
    fn boxplot_quartiles() {
        let b = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 4.0));
        assert!(boxplot_stats(&[]).is_err());
    }

    proptest! {
        #[test]
        fn invariants(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..300)) {
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let cm = confusion_matrix(&p, &t, 3).unwrap();
            prop_assert_eq!(cm.total() as usize, p.len());
            let r = class_metrics(&cm);
            for c in &r.classes {
                prop_assert_eq!(c.tp + c.fn_, c.samples);
                if let (Some(iou), Some(tpr)) = (c.iou, c.tpr) {
                    prop_assert!(iou <= tpr + 1e-12);
                    prop_assert!((0.0..=100.0).contains(&iou));
                }
            }
            // relabel with a cyclic permutation: rows permute, mean unchanged
            let perm = |l: usize| (l + 1) % 3;
            let cm2 = confusion_matrix(
                &p.iter().map(|&l| perm(l)).collect::<Vec<_>>(),
                &t.iter().map(|&l| perm(l)).collect::<Vec<_>>(),
                3,
            ).unwrap();
            let r2 = class_metrics(&cm2);
            for c in 0..3 {
                prop_assert_eq!(r.classes[c].iou, r2.classes[perm(c)].iou);
            }
            match (r.mean_iou, r2.mean_iou) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }
}
