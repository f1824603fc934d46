//! HTTP surface of a runtime: run, inject and remove walkers, and read the
//! orchestrator status when one is attached.

use std::collections::BTreeMap;
use std::future::Future;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::engine::RuntimeError;
use crate::graph::ObjectId;
use crate::jsorc::Orchestrator;
use crate::runtime::Runtime;
use crate::value::ContextMap;

#[derive(Clone)]
pub struct AppState {
    pub runtime: Arc<Runtime>,
    pub orchestrator: Option<Arc<Orchestrator>>,
    /// Seed labels usable as `start_node`.
    pub labels: Arc<BTreeMap<String, ObjectId>>,
}

/// A start node given by id or by seed label.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StartRef {
    Id(u64),
    Label(String),
}

#[derive(Debug, Deserialize)]
pub struct RunRequest {
    pub walker: String,
    pub start_node: StartRef,
    #[serde(default)]
    pub args: ContextMap,
}

#[derive(Debug, Deserialize)]
pub struct InjectRequest {
    pub source: String,
}

struct ApiError(StatusCode, Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<RuntimeError> for ApiError {
    fn from(e: RuntimeError) -> Self {
        let status = match &e {
            RuntimeError::UnknownWalker(_) => StatusCode::NOT_FOUND,
            RuntimeError::AccessDenied { .. } | RuntimeError::ActionNotAllowed { .. } => StatusCode::FORBIDDEN,
            RuntimeError::Parse(_) | RuntimeError::NotAWalker => StatusCode::BAD_REQUEST,
            RuntimeError::Graph(crate::graph::GraphError::NotFound(_)) => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e.to_json())
    }
}

fn bad_request(msg: String) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, json!({ "error": "BadRequest", "message": msg }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/walker/run", post(run))
        .route("/walker/inject", post(inject))
        .route("/walker/{name}", delete(remove))
        .route("/walker", get(list))
        .route("/jsorc/status", get(status))
        .with_state(state)
}

/// Serves until `shutdown` resolves; in-flight requests are drained.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

async fn run(State(st): State<AppState>, body: Result<Json<RunRequest>, axum::extract::rejection::JsonRejection>) -> Result<Json<Value>, ApiError> {
    let Json(req) = body.map_err(|e| bad_request(e.body_text()))?;
    let start = match &req.start_node {
        StartRef::Id(id) => ObjectId(*id),
        StartRef::Label(l) => *st
            .labels
            .get(l)
            .ok_or_else(|| bad_request(format!("unknown start label `{l}`")))?,
    };
    let rt = st.runtime.clone();
    // walkers block on the store and on remote actions
    let outcome = tokio::task::spawn_blocking(move || rt.run_walker(&req.walker, start, req.args))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "Internal", "message": e.to_string() })))??;
    Ok(Json(json!({
        "report": outcome.report,
        "status": outcome.status,
        "elapsed_us": outcome.elapsed_us,
    })))
}

async fn inject(State(st): State<AppState>, body: Result<Json<InjectRequest>, axum::extract::rejection::JsonRejection>) -> Result<Json<Value>, ApiError> {
    let Json(req) = body.map_err(|e| bad_request(e.body_text()))?;
    let name = st.runtime.inject_walker(&req.source)?;
    Ok(Json(json!({ "walker": name, "version": st.runtime.walkers().version() })))
}

async fn remove(State(st): State<AppState>, Path(name): Path<String>) -> Result<Json<Value>, ApiError> {
    st.runtime.remove_walker(&name)?;
    Ok(Json(json!({ "removed": name })))
}

async fn list(State(st): State<AppState>) -> Json<Value> {
    Json(json!({ "walkers": st.runtime.walkers().names() }))
}

async fn status(State(st): State<AppState>) -> Result<Json<Value>, StatusCode> {
    st.orchestrator.as_ref().map(|o| Json(o.status())).ok_or(StatusCode::NOT_FOUND)
}
