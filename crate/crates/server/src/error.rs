use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use makeup_core::{PipelineError, Stage};
use serde::Serialize;

/// A rejected or failed request; serialized as
/// `{"error": code, "message": text, "stage": name?}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<&'static str>,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            error,
            message: message.into(),
            stage: None,
        }
    }

    pub fn bad_request(error: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, error, message)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let (status, code) = match e.stage {
            Stage::Config => (StatusCode::UNPROCESSABLE_ENTITY, "out_of_range"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "pipeline_failed"),
        };
        Self {
            status,
            error: code,
            message: e.error.to_string(),
            stage: Some(e.stage.name()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}
