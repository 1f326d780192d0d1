//! Standardization, kNN and SVM classifiers, scenario-disjoint splitting and
//! model persistence.

pub mod knn;
pub mod model;
pub mod split;
pub mod standardize;
pub mod svm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use knn::{knn_train, KnnModel, DEFAULT_K};
pub use model::{read_model, write_model, MODEL_MAGIC, MODEL_SCHEMA_VERSION};
pub use split::{plan_split, SplitPlan, DEFAULT_TRAIN_FRACTION};
pub use standardize::Standardizer;
pub use svm::{grid_search, median_gamma, svm_train, Kernel, KernelSpec, SvmModel, SvmParams};

use crate::cloud::{GroundTruth, WeatherLabel};
use crate::features::{FeatureVector, FEATURE_COUNT};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("features must be finite")]
    NonFiniteFeature,
    #[error("k = {k} invalid for {n} training samples")]
    InvalidK { k: usize, n: usize },
    #[error("training data holds a single class")]
    SingleClass,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("SVM {positive}/{negative} did not converge after {iterations} iterations (KKT gap {gap:.3e})")]
    NotConverged {
        positive: WeatherLabel,
        negative: WeatherLabel,
        iterations: usize,
        gap: f64,
    },
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub truth: GroundTruth,
    pub scenario_id: String,
}

impl LabeledSample {
    pub fn label(&self) -> WeatherLabel {
        self.truth.label()
    }
}

/// Classifier input row for a feature vector, optionally followed by the
/// sixteen mask bits as 0/1.
pub fn feature_row(features: &FeatureVector, append_mask: bool) -> Vec<f64> {
    let mut row = features.values().to_vec();
    if append_mask {
        row.extend(features.mask().iter().map(|&m| if m { 1.0 } else { 0.0 }));
    }
    row
}

/// Splits samples so that no scenario id contributes to both sides. Sample
/// order is preserved within each side.
pub fn split_by_scenario(
    samples: &[LabeledSample],
    train_fraction: f64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>), ClassifyError> {
    let plan = plan_split(samples.iter().map(|s| (s.scenario_id.as_str(), s.label())), train_fraction)?;
    Ok(samples.iter().cloned().partition(|s| plan.is_train(&s.scenario_id)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    Svm,
}

impl std::str::FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "knn" => Ok(Self::Knn),
            "svm" => Ok(Self::Svm),
            other => Err(format!("unknown classifier '{other}', expected knn or svm")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Classifier {
    Knn(KnnModel),
    Svm(SvmModel),
}

/// A trained classifier together with how its input rows are built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub append_mask: bool,
    pub classifier: Classifier,
}

/// Training options shared by both classifier kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub kind: ClassifierKind,
    pub k: usize,
    pub svm: SvmParams,
    pub append_mask: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { kind: ClassifierKind::Svm, k: DEFAULT_K, svm: SvmParams::default(), append_mask: false }
    }
}

impl ClassifierModel {
    pub fn train(samples: &[LabeledSample], options: &TrainOptions) -> Result<Self, ClassifyError> {
        let features: Vec<&FeatureVector> = samples.iter().map(|s| &s.features).collect();
        let labels: Vec<WeatherLabel> = samples.iter().map(LabeledSample::label).collect();
        Self::fit(&features, &labels, options)
    }

    pub fn fit(features: &[&FeatureVector], labels: &[WeatherLabel], options: &TrainOptions) -> Result<Self, ClassifyError> {
        let rows: Vec<Vec<f64>> = features.iter().map(|f| feature_row(f, options.append_mask)).collect();
        let classifier = match options.kind {
            ClassifierKind::Knn => Classifier::Knn(knn_train(&rows, labels, options.k)?),
            ClassifierKind::Svm => Classifier::Svm(svm_train(&rows, labels, &options.svm)?),
        };
        Ok(Self { append_mask: options.append_mask, classifier })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self.classifier {
            Classifier::Knn(_) => ClassifierKind::Knn,
            Classifier::Svm(_) => ClassifierKind::Svm,
        }
    }

    pub fn input_dim(&self) -> usize {
        if self.append_mask {
            2 * FEATURE_COUNT
        } else {
            FEATURE_COUNT
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<WeatherLabel, ClassifyError> {
        match &self.classifier {
            Classifier::Knn(m) => m.predict(row),
            Classifier::Svm(m) => m.predict(row),
        }
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<WeatherLabel, ClassifyError> {
        self.predict_row(&feature_row(features, self.append_mask))
    }

    pub(crate) fn validate(&self) -> Result<(), ClassifyError> {
        let dim = match &self.classifier {
            Classifier::Knn(m) => {
                m.validate()?;
                m.standardizer().dim()
            }
            Classifier::Svm(m) => {
                m.validate()?;
                m.standardizer().dim()
            }
        };
        if dim != self.input_dim() {
            return Err(ClassifyError::InvalidModel(format!(
                "model expects {dim} inputs but mask setting implies {}",
                self.input_dim()
            )));
        }
        Ok(())
    }
}
