//! Model file container.
//!
//! A model file is a UTF-8 JSON document:
//!
//! ```text
//! {
//!   "magic": "LWMODEL",
//!   "schema_version": 1,
//!   "kind": "knn" | "svm",
//!   "feature_names": ["n1", ..., "eig3"],      // classifier input columns
//!   "model": {
//!     "append_mask": false,
//!     "classifier": { "kind": "knn" | "svm", "params": { ... } }
//!   }
//! }
//! ```
//!
//! `params` holds the standardizer (`mean`, `std`, `constant`) followed by
//! the kind-specific fields: for kNN the standardized training rows, labels
//! and `k`; for SVM the kernel, `C`, class list and one machine per class
//! pair with support vectors, dual coefficients, labels and offset. Floats
//! are written in shortest round-trip form, so a model reloads bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierKind, ClassifierModel, ClassifyError};
use crate::features::FEATURE_NAMES;

pub const MODEL_MAGIC: &str = "LWMODEL";
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    magic: String,
    schema_version: u32,
    kind: ClassifierKind,
    feature_names: Vec<String>,
    model: ClassifierModel,
}

fn input_names(append_mask: bool) -> Vec<String> {
    let mut names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    if append_mask {
        names.extend(FEATURE_NAMES.iter().map(|s| format!("mask_{s}")));
    }
    names
}

pub fn model_to_json(model: &ClassifierModel) -> String {
    let file = ModelFile {
        magic: MODEL_MAGIC.into(),
        schema_version: MODEL_SCHEMA_VERSION,
        kind: model.kind(),
        feature_names: input_names(model.append_mask),
        model: model.clone(),
    };
    serde_json::to_string_pretty(&file).expect("models serialize")
}

pub fn model_from_json(text: &str) -> Result<ClassifierModel, ClassifyError> {
    #[derive(Deserialize)]
    struct Header {
        magic: String,
        schema_version: u32,
    }
    let header: Header = serde_json::from_str(text)?;
    if header.magic != MODEL_MAGIC {
        return Err(ClassifyError::InvalidModel(format!("bad magic '{}'", header.magic)));
    }
    if header.schema_version != MODEL_SCHEMA_VERSION {
        return Err(ClassifyError::InvalidModel(format!(
            "unsupported schema version {} (expected {MODEL_SCHEMA_VERSION})",
            header.schema_version
        )));
    }
    let file: ModelFile = serde_json::from_str(text)?;
    if file.kind != file.model.kind() {
        return Err(ClassifyError::InvalidModel("kind tag disagrees with payload".into()));
    }
    if file.feature_names != input_names(file.model.append_mask) {
        return Err(ClassifyError::InvalidModel("unexpected feature columns".into()));
    }
    file.model.validate()?;
    Ok(file.model)
}

pub fn write_model(path: impl AsRef<Path>, model: &ClassifierModel) -> Result<(), ClassifyError> {
    fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ClassifierModel, ClassifyError> {
    model_from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{Classifier, KnnModel};
    use crate::cloud::WeatherLabel;

    fn tiny_knn() -> ClassifierModel {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| (0..16).map(|j| (i * 16 + j) as f64 * 0.37).collect()).collect();
        let labels = [WeatherLabel::Clear, WeatherLabel::Rain, WeatherLabel::Fog, WeatherLabel::Clear];
        let knn: KnnModel = crate::classify::knn_train(&rows, &labels, 3).unwrap();
        ClassifierModel { append_mask: false, classifier: Classifier::Knn(knn) }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = tiny_knn();
        let text = model_to_json(&m);
        assert!(text.contains("\"magic\": \"LWMODEL\""));
        assert_eq!(model_from_json(&text).unwrap(), m);
    }

    #[test]
    fn rejects_tampered_headers() {
        let text = model_to_json(&tiny_knn());
        let bad_magic = text.replacen("LWMODEL", "NOTAMODEL", 1);
        assert!(matches!(model_from_json(&bad_magic), Err(ClassifyError::InvalidModel(_))));
        let bad_version = text.replacen("\"schema_version\": 1", "\"schema_version\": 9", 1);
        assert!(matches!(model_from_json(&bad_version), Err(ClassifyError::InvalidModel(_))));
        let bad_kind = text.replacen("\"kind\": \"knn\"", "\"kind\": \"svm\"", 1);
        assert!(model_from_json(&bad_kind).is_err());
        assert!(model_from_json("{").is_err());
    }
}
