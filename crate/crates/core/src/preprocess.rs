//! Mean/mode imputation and min-max normalization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Bounds, Dataset, DisorderLabel, RespondentRecord, Schema};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("cannot fit on an empty dataset")]
    EmptyDataset,
    #[error("feature {0:?} is missing in every record")]
    AllMissing(String),
    #[error("degenerate normalization bounds [{min}, {max}]")]
    DegenerateBounds { min: f64, max: f64 },
    #[error("value {value} outside normalization bounds [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },
    #[error("record {id:?} has {got} values, model expects {expected}")]
    Arity { id: String, got: usize, expected: usize },
    #[error("record {0:?} has no label")]
    Unlabeled(String),
}

/// Min-max rescaling of `x` from `bounds` to `[0, 1]`.
pub fn normalize_value(x: f64, bounds: Bounds) -> Result<f64, PreprocessError> {
    let Bounds { min, max } = bounds;
    if !(min < max) {
        return Err(PreprocessError::DegenerateBounds { min, max });
    }
    if !bounds.contains(x) {
        return Err(PreprocessError::OutOfRange { value: x, min, max });
    }
    Ok((x - min) / (max - min))
}

/// A normalized feature vector in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub source_id: String,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    Mean,
    Mode,
}

/// Fitted preprocessing constants.
///
/// Normalization bounds are the schema's declared ranges, never the observed
/// data range, so a single record can be transformed without reference to any
/// training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessorModel {
    pub feature_order: Vec<String>,
    pub strategy: Vec<Imputation>,
    pub imputation: Vec<f64>,
    pub bounds: Vec<Bounds>,
}

impl PreprocessorModel {
    /// Computes means (ordinal/continuous) and modes (binary/categorical)
    /// from `train` only. Mode ties go to the smaller code.
    pub fn fit(train: &Dataset) -> Result<Self, PreprocessError> {
        if train.is_empty() {
            return Err(PreprocessError::EmptyDataset);
        }
        let schema = train.schema();
        let mut strategy = Vec::with_capacity(schema.len());
        let mut imputation = Vec::with_capacity(schema.len());
        for (i, spec) in schema.features().iter().enumerate() {
            let present: Vec<f64> = train.records().iter().filter_map(|r| r.values[i]).collect();
            if present.is_empty() {
                return Err(PreprocessError::AllMissing(spec.name.clone()));
            }
            if spec.is_coded() {
                strategy.push(Imputation::Mode);
                imputation.push(mode(&present));
            } else {
                strategy.push(Imputation::Mean);
                imputation.push(present.iter().sum::<f64>() / present.len() as f64);
            }
        }
        Ok(Self {
            feature_order: schema.names().map(str::to_owned).collect(),
            strategy,
            imputation,
            bounds: schema.features().iter().map(|f| f.range()).collect(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.feature_order.len()
    }

    /// Checks that this model was fitted against `schema`.
    pub fn matches(&self, schema: &Schema) -> bool {
        self.feature_order.iter().map(String::as_str).eq(schema.names())
            && self.bounds.iter().zip(schema.features()).all(|(b, f)| *b == f.range())
    }

    /// Fills missing slots; present values are left untouched.
    pub fn impute(&self, record: &RespondentRecord) -> RespondentRecord {
        let values = record
            .values
            .iter()
            .zip(&self.imputation)
            .map(|(v, fill)| Some(v.unwrap_or(*fill)))
            .collect();
        RespondentRecord { values, ..record.clone() }
    }

    /// Imputes then normalizes every feature by its declared bounds.
    pub fn transform(&self, record: &RespondentRecord) -> Result<FeatureVector, PreprocessError> {
        if record.values.len() != self.dimension() {
            return Err(PreprocessError::Arity {
                id: record.id.clone(),
                got: record.values.len(),
                expected: self.dimension(),
            });
        }
        let values = record
            .values
            .iter()
            .zip(&self.imputation)
            .zip(&self.bounds)
            .map(|((v, fill), b)| normalize_value(v.unwrap_or(*fill), *b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureVector { values, source_id: record.id.clone() })
    }

    /// Transforms a labeled dataset into classifier training pairs.
    pub fn transform_labeled(
        &self,
        ds: &Dataset,
    ) -> Result<Vec<(FeatureVector, DisorderLabel)>, PreprocessError> {
        ds.records()
            .iter()
            .map(|r| {
                let label = r.label.ok_or_else(|| PreprocessError::Unlabeled(r.id.clone()))?;
                Ok((self.transform(r)?, label))
            })
            .collect()
    }
}

/// Most frequent value; ties resolve to the smallest.
fn mode(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (sorted[0], 0usize);
    let mut run = (sorted[0], 0usize);
    for &v in &sorted {
        if v == run.0 {
            run.1 += 1;
        } else {
            run = (v, 1);
        }
        if run.1 > best.1 {
            best = run;
        }
    }
    best.0
}
