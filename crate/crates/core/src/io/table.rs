//! Feature table CSV.
//!
//! Columns: `scenario,label,f1..f16,m1..m16`. `label` is the class number
//! (1 clear, 2 rain, 3 fog), `f*` are feature values in shortest round-trip
//! form and `m*` are 0/1 mask flags.

use std::io::{Read, Write};

use super::IoError;
use crate::cloud::WeatherLabel;
use crate::features::{FeatureVector, FEATURE_COUNT};

pub const TABLE_COLUMNS: usize = 2 + 2 * FEATURE_COUNT;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub scenario_id: String,
    pub label: WeatherLabel,
    pub features: FeatureVector,
}

pub fn header() -> Vec<String> {
    let mut h = vec!["scenario".to_string(), "label".to_string()];
    h.extend((1..=FEATURE_COUNT).map(|i| format!("f{i}")));
    h.extend((1..=FEATURE_COUNT).map(|i| format!("m{i}")));
    h
}

pub fn write_feature_table<W: Write>(out: W, rows: &[FeatureRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for row in rows {
        let mut rec = vec![row.scenario_id.clone(), row.label.number().to_string()];
        rec.extend(row.features.values().iter().map(f64::to_string));
        rec.extend(row.features.mask().iter().map(|&m| if m { "1" } else { "0" }.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_table<R: Read>(input: R) -> Result<Vec<FeatureRow>, IoError> {
    let mut r = csv::Reader::from_reader(input);
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header() {
        return Err(IoError::Table { line: 1, reason: format!("expected {TABLE_COLUMNS} columns scenario,label,f1..f16,m1..m16") });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |reason: String| IoError::Table { line, reason };
        let label_text = &rec[1];
        let label = label_text
            .parse::<u8>()
            .ok()
            .and_then(WeatherLabel::from_number)
            .ok_or_else(|| err(format!("bad label '{label_text}'")))?;
        let mut values = [0.0; FEATURE_COUNT];
        let mut mask = [false; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            let v = &rec[2 + i];
            values[i] = v.parse().map_err(|_| err(format!("bad value '{v}' in f{}", i + 1)))?;
            mask[i] = match &rec[2 + FEATURE_COUNT + i] {
                "0" => false,
                "1" => true,
                m => return Err(err(format!("bad mask '{m}' in m{}", i + 1))),
            };
        }
        rows.push(FeatureRow {
            scenario_id: rec[0].to_string(),
            label,
            features: FeatureVector::from_parts(values, mask),
        });
    }
    Ok(rows)
}
