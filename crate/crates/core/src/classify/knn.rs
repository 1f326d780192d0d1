//! Unweighted k-nearest-neighbour voting in standardized feature space.

use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::ClassifyError;
use crate::cloud::WeatherLabel;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    standardizer: Standardizer,
    /// Standardized training rows.
    points: Vec<Vec<f64>>,
    labels: Vec<WeatherLabel>,
    k: usize,
}

pub fn knn_train(rows: &[Vec<f64>], labels: &[WeatherLabel], k: usize) -> Result<KnnModel, ClassifyError> {
    if rows.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    if rows.len() != labels.len() {
        return Err(ClassifyError::LengthMismatch { rows: rows.len(), labels: labels.len() });
    }
    if k == 0 || k > rows.len() {
        return Err(ClassifyError::InvalidK { k, n: rows.len() });
    }
    let standardizer = Standardizer::fit(rows)?;
    let points = rows
        .iter()
        .map(|r| standardizer.transform(r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(KnnModel {
        standardizer,
        points,
        labels: labels.to_vec(),
        k,
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Majority label among the `k` nearest training rows.
    ///
    /// Neighbours are ranked by distance, then by class number, so the result
    /// does not depend on the training order. A vote tie goes to the tied
    /// class owning the nearest neighbour.
    pub fn predict(&self, x: &[f64]) -> Result<WeatherLabel, ClassifyError> {
        let q = self.standardizer.transform(x)?;
        let mut ranked: Vec<(f64, WeatherLabel)> = self
            .points
            .iter()
            .zip(&self.labels)
            .map(|(p, l)| (squared_distance(p, &q), *l))
            .collect();
        let by_rank = |a: &(f64, WeatherLabel), b: &(f64, WeatherLabel)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < ranked.len() {
            ranked.select_nth_unstable_by(self.k - 1, by_rank);
            ranked.truncate(self.k);
        }
        ranked.sort_by(by_rank);

        let mut votes = [0usize; 3];
        for (_, l) in &ranked {
            votes[l.index()] += 1;
        }
        let best = *votes.iter().max().expect("three classes");
        let winner = ranked
            .iter()
            .find(|(_, l)| votes[l.index()] == best)
            .map(|(_, l)| *l)
            .expect("k >= 1 neighbours");
        Ok(winner)
    }

    pub(crate) fn validate(&self) -> Result<(), ClassifyError> {
        self.standardizer.validate()?;
        if self.points.is_empty() || self.points.len() != self.labels.len() {
            return Err(ClassifyError::InvalidModel("knn training data inconsistent".into()));
        }
        if self.k == 0 || self.k > self.points.len() {
            return Err(ClassifyError::InvalidModel(format!("k = {} invalid for {} rows", self.k, self.points.len())));
        }
        if self.points.iter().any(|p| p.len() != self.standardizer.dim()) {
            return Err(ClassifyError::InvalidModel("knn row dimension mismatch".into()));
        }
        Ok(())
    }
}
