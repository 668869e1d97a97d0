use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use taskgrasp::pipeline::PipelineError;

/// Error body: `{"error": {"kind": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into() }
    }

    pub fn bad_request(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, kind, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let (status, kind) = match &e {
            PipelineError::InvalidObservation(_) => (StatusCode::BAD_REQUEST, "InvalidObservation"),
            PipelineError::InvalidConfig(_) => (StatusCode::BAD_REQUEST, "InvalidConfig"),
            PipelineError::InvalidRequest(_) => (StatusCode::BAD_REQUEST, "InvalidRequest"),
            PipelineError::NotFound(_) => (StatusCode::NOT_FOUND, "NotFound"),
            PipelineError::NoReasoning => (StatusCode::CONFLICT, "NoReasoning"),
            PipelineError::TraceWrite(_) => (StatusCode::INTERNAL_SERVER_ERROR, "TraceWrite"),
        };
        Self::new(status, kind, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": { "kind": self.kind, "message": self.message } }))).into_response()
    }
}
