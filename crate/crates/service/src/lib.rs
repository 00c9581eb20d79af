//! HTTP screening service.
//!
//! Routes, all JSON under `/api/v1`:
//!
//! | method | path                          | success                  |
//! |--------|-------------------------------|--------------------------|
//! | GET    | `/health`                     | `{status, model_loaded}` |
//! | GET    | `/schema`                     | questionnaire schema     |
//! | POST   | `/assessments`                | 201 + result             |
//! | POST   | `/assessments/{id}/consent`   | 200 + optional route     |
//! | GET    | `/vcbt/{disorder}`            | catalog entry            |
//!
//! Every assessment and consent is appended to a JSON-lines log before the
//! response is sent.

pub mod api;
pub mod config;
pub mod log;

use std::future::Future;
use std::net::SocketAddr;

use mindscreen_core::{builtin_schema, ScreeningModel};
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::{ingest, router, AppState, AssessmentRequest, AssessmentResult, ConsentResponse};
pub use config::ServiceConfig;
pub use log::{replay, AssessmentLog};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot load model: {0}")]
    Model(String),
    #[error("assessment log error: {0}")]
    Log(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn load_model(config: &ServiceConfig) -> Result<ScreeningModel, ServiceError> {
    let path = &config.model_path;
    let file = std::fs::File::open(path).map_err(|e| ServiceError::Model(format!("{}: {e}", path.display())))?;
    let model = ScreeningModel::from_reader(std::io::BufReader::new(file))
        .map_err(|e| ServiceError::Model(format!("{}: {e}", path.display())))?;
    if !model.preprocessor.matches(&builtin_schema()) {
        return Err(ServiceError::Model(format!("{}: features do not match the questionnaire", path.display())));
    }
    Ok(model)
}

/// Loads the model, opens the log and binds. Split from [`serve_on`] so
/// callers can learn the bound address before serving.
pub async fn bind(config: &ServiceConfig) -> Result<(TcpListener, AppState), ServiceError> {
    let model = load_model(config)?;
    let log = AssessmentLog::open(&config.log_path)?;
    let addr = format!("{}:{}", config.host, config.port);
    let listener = TcpListener::bind(&addr).await.map_err(|source| ServiceError::Bind { addr, source })?;
    Ok((listener, AppState::new(builtin_schema(), Some(model), log)))
}

/// Serves until `shutdown` resolves, then drains in-flight requests and
/// syncs the log.
pub async fn serve_on(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let log = state.log().clone();
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    let mut log = log.lock().map_err(|_| ServiceError::Log("lock poisoned".into()))?;
    log.flush()
}

/// Runs until Ctrl-C.
pub async fn serve(config: &ServiceConfig) -> Result<(), ServiceError> {
    let (listener, state) = bind(config).await?;
    let addr: SocketAddr = listener.local_addr()?;
    eprintln!("listening on http://{addr}");
    serve_on(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
