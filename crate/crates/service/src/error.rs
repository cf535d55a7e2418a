use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

/// Error reported to HTTP clients as `{"error": code, "message": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(code: &'static str, message: impl ToString) -> Self {
        Self { status: 400, code, message: message.to_string() }
    }

    pub fn conflict(code: &'static str, message: impl ToString) -> Self {
        Self { status: 409, code, message: message.to_string() }
    }

    pub fn unprocessable(code: &'static str, message: impl ToString) -> Self {
        Self { status: 422, code, message: message.to_string() }
    }

    pub fn internal(message: impl ToString) -> Self {
        Self { status: 500, code: "internal", message: message.to_string() }
    }

    pub fn unavailable() -> Self {
        Self { status: 503, code: "engine_stopped", message: "the engine is not running".into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("cannot load template database {path}: {reason}")]
    Database { path: String, reason: String },
    #[error("cannot load plan {path}: {reason}")]
    Plan { path: String, reason: String },
    #[error("cannot load simulator script {path}: {reason}")]
    Script { path: String, reason: String },
    #[error("cannot listen on {addr}: {reason}")]
    Listen { addr: String, reason: String },
    #[error("{0}")]
    Pipeline(String),
}
