//! HTTP+JSON front end for live play sessions.
//!
//! | method | path | body | success |
//! |--------|------|------|---------|
//! | POST | `/sessions` | `{"player_alias": "..."}` | 201, session id and intro |
//! | GET | `/sessions/{id}/round` | | 200, current round |
//! | POST | `/sessions/{id}/action` | `{"action": "go" \| "dont_go"}` | 200, round results |
//! | GET | `/sessions/{id}/summary` | | 200, progress and finished games |
//!
//! Errors are `{"error": {"code": ..., "message": ...}}` with codes
//! `invalid_request` (400), `missing_alias` (422), `invalid_action` (422),
//! `unknown_session` (404), `session_not_active` (409), `no_pending_round`
//! (409) and `internal` (500).

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use persuasion_core::session::{SessionError, SessionManager};

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct CreateRequest {
    pub player_alias: String,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ActionRequest {
    pub action: String,
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::MissingAlias => (StatusCode::UNPROCESSABLE_ENTITY, "missing_alias"),
            SessionError::InvalidAction(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_action"),
            SessionError::Unknown(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            SessionError::NotActive(_) => (StatusCode::CONFLICT, "session_not_active"),
            SessionError::NoPendingRound => (StatusCode::CONFLICT, "no_pending_round"),
            _ => {
                log::error!("{e}");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": {"code": self.code, "message": self.message}}))).into_response()
    }
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))
}

type Shared = State<Arc<SessionManager>>;

async fn create(State(m): Shared, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateRequest = parse(&body)?;
    let created = m.create(&req.player_alias)?;
    log::info!("session {} created", created.session_id);
    Ok((StatusCode::CREATED, Json(created)))
}

async fn round(State(m): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(m.round(&id)?))
}

async fn action(State(m): Shared, Path(id): Path<String>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: ActionRequest = parse(&body)?;
    let result = m.act(&id, &req.action)?;
    if result.interaction_finished {
        log::info!("session {id} completed");
    }
    Ok(Json(result))
}

async fn summary(State(m): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(m.summary(&id)?))
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/round", get(round))
        .route("/sessions/{id}/action", post(action))
        .route("/sessions/{id}/summary", get(summary))
        .with_state(manager)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, manager: Arc<SessionManager>) -> std::io::Result<()> {
    axum::serve(listener, router(manager)).await
}
