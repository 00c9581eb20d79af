//! A fitted preprocessor plus classifier, and its JSON model file.
//!
//! Both classifier kinds share one envelope:
//!
//! ```json
//! { "format_version": 1, "model_kind": "knn", "model": { ... }, "preprocessor": { ... } }
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::ClassifierKind;
use crate::knn::{knn_fit, KnnModel, Neighbor, DEFAULT_K};
use crate::preprocess::{FeatureVector, PreprocessorModel};
use crate::schema::{validate_record, Dataset, DisorderLabel, RespondentRecord, Schema};
use crate::svm::{MulticlassSvmModel, SvmParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
    #[error("training data is unlabeled")]
    Unlabeled,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub k: usize,
    pub svm: SvmParams,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K, svm: SvmParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", content = "model", rename_all = "lowercase")]
pub enum Classifier {
    Knn(KnnModel),
    Svm(MulticlassSvmModel),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::Knn(_) => ClassifierKind::Knn,
            Self::Svm(_) => ClassifierKind::Svm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionDetail {
    Neighbors(Vec<Neighbor>),
    DecisionValues([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: DisorderLabel,
    pub detail: PredictionDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningModel {
    pub format_version: u32,
    #[serde(flatten)]
    pub classifier: Classifier,
    pub preprocessor: PreprocessorModel,
}

impl ScreeningModel {
    /// Fits the preprocessor and the chosen classifier on `train`.
    pub fn train(kind: ClassifierKind, config: &ClassifierConfig, train: &Dataset) -> crate::Result<Self> {
        if !train.is_labeled() {
            return Err(ModelError::Unlabeled.into());
        }
        let preprocessor = PreprocessorModel::fit(train)?;
        let pairs = preprocessor.transform_labeled(train)?;
        let classifier = match kind {
            ClassifierKind::Knn => Classifier::Knn(knn_fit(&pairs, config.k)?),
            ClassifierKind::Svm => Classifier::Svm(MulticlassSvmModel::train(&pairs, &config.svm)?),
        };
        Ok(Self { format_version: FORMAT_VERSION, classifier, preprocessor })
    }

    pub fn kind(&self) -> ClassifierKind {
        self.classifier.kind()
    }

    pub fn predict_vector(&self, v: &FeatureVector) -> crate::Result<Prediction> {
        Ok(match &self.classifier {
            Classifier::Knn(m) => {
                let p = m.predict(&v.values)?;
                Prediction { label: p.label, detail: PredictionDetail::Neighbors(p.neighbors) }
            }
            Classifier::Svm(m) => {
                let p = m.predict(&v.values)?;
                Prediction { label: p.label, detail: PredictionDetail::DecisionValues(p.decision_values) }
            }
        })
    }

    /// Imputes, normalizes and classifies one record.
    pub fn predict(&self, record: &RespondentRecord) -> crate::Result<Prediction> {
        let v = self.preprocessor.transform(record)?;
        self.predict_vector(&v)
    }

    /// Validates against `schema` first, then predicts.
    pub fn assess(&self, schema: &Schema, record: &RespondentRecord) -> crate::Result<Prediction> {
        let violations = validate_record(record, schema);
        if !violations.is_empty() {
            return Err(crate::schema::DataError::Validation(violations).into());
        }
        self.predict(record)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ModelError::Version(self.format_version));
        }
        let dim = self.preprocessor.dimension();
        let p = &self.preprocessor;
        if p.imputation.len() != dim || p.bounds.len() != dim || p.strategy.len() != dim {
            return Err(ModelError::Inconsistent("preprocessor arrays differ in length".into()));
        }
        let classifier_dim = match &self.classifier {
            Classifier::Knn(m) => {
                m.validate().map_err(|e| ModelError::Inconsistent(e.to_string()))?;
                m.dimension()
            }
            Classifier::Svm(m) => {
                m.validate().map_err(|e| ModelError::Inconsistent(e.to_string()))?;
                m.dimension()
            }
        };
        if classifier_dim != dim {
            return Err(ModelError::Inconsistent(format!(
                "classifier expects {classifier_dim} features, preprocessor produces {dim}"
            )));
        }
        Ok(())
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<(), ModelError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self, ModelError> {
        let model: Self = serde_json::from_reader(r)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        Self::from_reader(s.as_bytes())
    }
}
