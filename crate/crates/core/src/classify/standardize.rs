use serde::{Deserialize, Serialize};

use super::ClassifyError;

/// Relative spread below which a feature counts as constant.
const CONSTANT_EPS: f64 = 1e-12;

/// Per-feature z-scoring fitted on training data.
///
/// A feature with (numerically) zero spread is flagged constant: it is
/// centered but not scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
    constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, ClassifyError> {
        let first = rows.first().ok_or(ClassifyError::EmptyTrainingSet)?;
        let dim = first.len();
        for row in rows {
            if row.len() != dim {
                return Err(ClassifyError::DimensionMismatch { expected: dim, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ClassifyError::NonFiniteFeature);
            }
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std = Vec::with_capacity(dim);
        let mut constant = Vec::with_capacity(dim);
        for (s, m) in var.iter().zip(&mean) {
            let sd = (s / n).sqrt();
            let is_const = !(sd > CONSTANT_EPS * m.abs().max(1.0));
            constant.push(is_const);
            std.push(if is_const { 1.0 } else { sd });
        }
        Ok(Self { mean, std, constant })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Scale divisor per feature (1 for constant features).
    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn constant(&self) -> &[bool] {
        &self.constant
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, ClassifyError> {
        if x.len() != self.dim() {
            return Err(ClassifyError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub(crate) fn validate(&self) -> Result<(), ClassifyError> {
        let d = self.dim();
        if d == 0 || self.std.len() != d || self.constant.len() != d {
            return Err(ClassifyError::InvalidModel("standardizer dimensions disagree".into()));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(ClassifyError::InvalidModel("standardizer holds invalid statistics".into()));
        }
        Ok(())
    }
}
