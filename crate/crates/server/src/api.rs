//! HTTP routes over the session store.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use sha2::{Digest, Sha256};

use hetqa_core::gnn::checkpoint::checkpoint_bytes;
use hetqa_core::gnn::GnnModel;
use hetqa_core::pipeline::Pipeline;

use crate::session::SessionStore;
use crate::views::{CreatedSession, Health, ModelVersions, QuestionRequest, SessionView, TurnView};

#[derive(Clone)]
pub struct AppState {
    pub pipeline: Arc<Pipeline>,
    pub sessions: Arc<SessionStore>,
    pub model_versions: ModelVersions,
}

impl AppState {
    pub fn new(pipeline: Pipeline, sessions: SessionStore) -> Self {
        let model_versions = ModelVersions {
            pruning: model_version(&pipeline.pruning),
            answering: model_version(&pipeline.answering),
        };
        Self {
            pipeline: Arc::new(pipeline),
            sessions: Arc::new(sessions),
            model_versions,
        }
    }
}

/// Short content hash of the checkpoint encoding.
pub fn model_version(model: &GnnModel) -> String {
    match checkpoint_bytes(model) {
        Ok(bytes) => {
            let digest = format!("{:x}", Sha256::digest(&bytes));
            format!("sha256:{}", &digest[..16])
        }
        Err(e) => format!("unavailable: {e}"),
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Validation(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Validation(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::Validation(r.body_text())
    }
}

fn unknown(id: &str) -> ApiError {
    ApiError::NotFound(format!("unknown session {id}"))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/sessions", post(create_session))
        .route(
            "/api/sessions/{id}",
            get(get_session).delete(delete_session),
        )
        .route("/api/sessions/{id}/questions", post(post_question))
        .with_state(state)
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_versions: state.model_versions.clone(),
    })
}

async fn create_session(State(state): State<AppState>) -> (StatusCode, Json<CreatedSession>) {
    let session_id = state.sessions.create();
    (StatusCode::CREATED, Json(CreatedSession { session_id }))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let handle = state.sessions.get(&id).ok_or_else(|| unknown(&id))?;
    let session = handle.lock().await;
    Ok(Json(session.view()))
}

async fn delete_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    if state.sessions.delete(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(unknown(&id))
    }
}

async fn post_question(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<QuestionRequest>, JsonRejection>,
) -> Result<Json<TurnView>, ApiError> {
    let handle = state.sessions.get(&id).ok_or_else(|| unknown(&id))?;
    let Json(req) = body?;
    let question = req.question.trim().to_string();
    if question.is_empty() {
        return Err(ApiError::Validation("question must not be empty".into()));
    }
    // held across the turn: one question at a time per session
    let mut session = handle.lock().await;
    let history = session.conversation.clone();
    let pipeline = state.pipeline.clone();
    let q = question.clone();
    let result = tokio::task::spawn_blocking(move || pipeline.run_turn(&history, &q))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let view = TurnView::from_result(session.turns.len() + 1, &result);
    state.sessions.record_turn(&mut session, view.clone());
    Ok(Json(view))
}
