//! Core of the `mindscreen` behavioral-disorder screening toolkit.
//!
//! The pipeline is: an 18-feature questionnaire ([`schema`]) is ingested from
//! CSV, imputed and min-max normalized ([`preprocess`]), then classified into
//! one of three disorders by either a k-nearest-neighbors model ([`knn`]) or a
//! one-vs-rest linear SVM ([`svm`]). [`evaluation`] provides splits,
//! cross-validation, per-class metrics and model selection; [`synth`] produces
//! labeled synthetic cohorts; [`model`] ties a fitted preprocessor and
//! classifier into a serializable screening model; [`vcbt`] holds the static
//! therapy content served after a detection.

pub mod evaluation;
pub mod knn;
pub mod model;
pub mod preprocess;
pub mod schema;
pub mod svm;
pub mod synth;
pub mod vcbt;

pub use evaluation::{ClassificationReport, ClassifierKind, ConfusionMatrix};
pub use model::{ClassifierConfig, ScreeningModel};
pub use preprocess::{FeatureVector, PreprocessorModel};
pub use schema::{builtin_schema, Dataset, DisorderLabel, RespondentRecord, Schema};

use thiserror::Error;

/// Umbrella error for operations that cross module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] schema::DataError),
    #[error(transparent)]
    Preprocess(#[from] preprocess::PreprocessError),
    #[error(transparent)]
    Knn(#[from] knn::KnnError),
    #[error(transparent)]
    Svm(#[from] svm::SvmError),
    #[error(transparent)]
    Eval(#[from] evaluation::EvalError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
