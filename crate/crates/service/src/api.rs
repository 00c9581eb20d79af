use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use mindscreen_core::schema::{FeatureSpec, Violation, ViolationKind};
use mindscreen_core::vcbt::{self, CatalogEntry};
use mindscreen_core::{ClassifierKind, DisorderLabel, RespondentRecord, Schema, ScreeningModel};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::log::{Append, AssessmentEntry, AssessmentLog, ConsentOutcome};

/// Shared state. The model and schema are read-only; the log is the single
/// mutable resource.
#[derive(Clone)]
pub struct AppState {
    schema: Arc<Schema>,
    model: Option<Arc<ScreeningModel>>,
    log: Arc<Mutex<AssessmentLog>>,
}

impl AppState {
    pub fn new(schema: Schema, model: Option<ScreeningModel>, log: AssessmentLog) -> Self {
        Self { schema: Arc::new(schema), model: model.map(Arc::new), log: Arc::new(Mutex::new(log)) }
    }

    pub fn log(&self) -> &Arc<Mutex<AssessmentLog>> {
        &self.log
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentRequest {
    /// Feature name to answer; numbers, numeric strings or category labels.
    pub answers: BTreeMap<String, Value>,
    #[serde(default)]
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub assessment_id: String,
    pub label: DisorderLabel,
    pub disorder: String,
    pub disclaimer: String,
    pub model_kind: ClassifierKind,
    pub timestamp: DateTime<Utc>,
}

impl From<&AssessmentEntry> for AssessmentResult {
    fn from(e: &AssessmentEntry) -> Self {
        Self {
            assessment_id: e.assessment_id.clone(),
            label: e.label,
            disorder: e.label.name().to_owned(),
            disclaimer: vcbt::DISCLAIMER.to_owned(),
            model_kind: e.model_kind,
            timestamp: e.timestamp,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ConsentRequest {
    pub agreed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsentResponse {
    pub assessment_id: String,
    pub agreed: bool,
    /// Present only when the respondent agreed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelInfo {
    pub code: u8,
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaResponse {
    pub features: Vec<FeatureSpec>,
    pub labels: Vec<LabelInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Validation(Vec<Violation>),
    NotFound(String),
    Conflict(String),
    NoModel,
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error, message, violations) = match self {
            Self::BadRequest(m) => (StatusCode::BAD_REQUEST, "bad_request", m, vec![]),
            Self::Validation(v) => {
                let names: Vec<&str> = v.iter().map(|x| x.feature.as_str()).collect();
                let m = format!("invalid answers: {}", names.join(", "));
                (StatusCode::UNPROCESSABLE_ENTITY, "validation", m, v)
            }
            Self::NotFound(m) => (StatusCode::NOT_FOUND, "not_found", m, vec![]),
            Self::Conflict(m) => (StatusCode::CONFLICT, "conflict", m, vec![]),
            Self::NoModel => {
                (StatusCode::SERVICE_UNAVAILABLE, "model_unavailable", "no model is loaded".to_owned(), vec![])
            }
            Self::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m, vec![]),
        };
        (status, Json(ErrorBody { error: error.to_owned(), message, violations })).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/schema", get(schema))
        .route("/api/v1/assessments", post(assess))
        .route("/api/v1/assessments/{id}/consent", post(consent))
        .route("/api/v1/vcbt/{disorder}", get(vcbt_content))
        .with_state(state)
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    Json(serde_json::json!({
        "status": "ok",
        "model_loaded": state.model.is_some(),
        "model_kind": state.model.as_ref().map(|m| m.kind()),
    }))
}

async fn schema(State(state): State<AppState>) -> Json<SchemaResponse> {
    Json(SchemaResponse {
        features: state.schema.features().to_vec(),
        labels: DisorderLabel::ALL.iter().map(|l| LabelInfo { code: l.code(), name: l.name().to_owned() }).collect(),
    })
}

/// Turns a JSON answer into the text form the schema parser accepts.
fn answer_text(v: &Value) -> Result<Option<String>, ()> {
    match v {
        Value::Null => Ok(None),
        Value::Number(n) => Ok(Some(n.to_string())),
        Value::String(s) => Ok(Some(s.clone())),
        Value::Bool(b) => Ok(Some(if *b { "1" } else { "0" }.to_owned())),
        Value::Array(_) | Value::Object(_) => Err(()),
    }
}

/// Parses a JSON answer map into a record. Numbers, numeric strings, category
/// labels and booleans are accepted; `null` marks an unanswered item.
pub fn ingest(schema: &Schema, answers: &BTreeMap<String, Value>) -> Result<RespondentRecord, Vec<Violation>> {
    let mut texts = Vec::new();
    let mut bad = Vec::new();
    for (name, v) in answers {
        match answer_text(v) {
            Ok(Some(t)) => texts.push((name.as_str(), t)),
            Ok(None) => {}
            Err(()) => bad.push(Violation {
                feature: name.clone(),
                row: None,
                value: v.to_string(),
                kind: ViolationKind::NotANumber,
            }),
        }
    }
    let parsed = RespondentRecord::from_answers(schema, "", texts.iter().map(|(n, t)| (*n, t.as_str())));
    match parsed {
        Ok(r) if bad.is_empty() => Ok(r),
        Ok(_) => Err(bad),
        Err(mut v) => {
            v.retain(|x| !bad.iter().any(|b| b.feature == x.feature));
            bad.extend(v);
            Err(bad)
        }
    }
}

async fn assess(
    State(state): State<AppState>,
    body: Result<Json<AssessmentRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<AssessmentResult>), ApiError> {
    let Json(req) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let record = ingest(&state.schema, &req.answers).map_err(ApiError::Validation)?;
    let model = state.model.as_ref().ok_or(ApiError::NoModel)?;
    let prediction = model.assess(&state.schema, &record).map_err(|e| match e {
        mindscreen_core::Error::Data(mindscreen_core::schema::DataError::Validation(v)) => ApiError::Validation(v),
        other => ApiError::Internal(other.to_string()),
    })?;

    let answers = state.schema.names().map(str::to_owned).zip(record.values.iter().copied()).collect();
    let entry = AssessmentEntry {
        timestamp: Utc::now(),
        assessment_id: uuid::Uuid::new_v4().to_string(),
        idempotency_key: req.idempotency_key,
        answers,
        label: prediction.label,
        model_kind: model.kind(),
    };
    let mut log = state.log.lock().map_err(|_| ApiError::Internal("assessment log lock poisoned".into()))?;
    match log.append_assessment(entry).map_err(|e| ApiError::Internal(e.to_string()))? {
        Append::Created(e) => Ok((StatusCode::CREATED, Json((&e).into()))),
        Append::Replayed(e) => Ok((StatusCode::OK, Json((&e).into()))),
        Append::KeyConflict => Err(ApiError::Conflict("idempotency key was already used with different answers".into())),
    }
}

async fn consent(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ConsentRequest>, JsonRejection>,
) -> Result<Json<ConsentResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let mut log = state.log.lock().map_err(|_| ApiError::Internal("assessment log lock poisoned".into()))?;
    match log.record_consent(&id, req.agreed).map_err(|e| ApiError::Internal(e.to_string()))? {
        ConsentOutcome::UnknownAssessment => Err(ApiError::NotFound(format!("no assessment {id}"))),
        ConsentOutcome::Duplicate => Err(ApiError::Conflict(format!("consent for {id} is already recorded"))),
        ConsentOutcome::Recorded(rec, label) => Ok(Json(if rec.agreed {
            ConsentResponse {
                assessment_id: rec.assessment_id,
                agreed: true,
                route: Some(vcbt::route_for(label)),
                message: format!("continue to the {} therapy pages", label.name()),
            }
        } else {
            ConsentResponse {
                assessment_id: rec.assessment_id,
                agreed: false,
                route: None,
                message: "thank you; no further steps were taken".into(),
            }
        })),
    }
}

async fn vcbt_content(Path(disorder): Path<String>) -> Result<Json<CatalogEntry>, ApiError> {
    vcbt::catalog_by_name(&disorder)
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("no vCBT catalog for {disorder:?}")))
}
