use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;
use crate::retriever::RetrieveError;
use crate::syncpipe::SyncError;

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    /// Set on chat failures so the client can keep the conversation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code: code.into(), message: message.into(), session_id: None } }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let code = match &e {
            IngestError::InvalidTableName(_) => "invalid_table",
            IngestError::EmptyNaturalKey => "missing_key",
            IngestError::MalformedCsv { .. } => "malformed_csv",
            IngestError::MissingKeyColumn { .. } => "missing_key_column",
            IngestError::DuplicateKey { .. } => "duplicate_key",
            IngestError::SchemaMismatch { .. } => "schema_mismatch",
            IngestError::InvalidUrl { .. } => "invalid_url",
            IngestError::Db(_) | IngestError::Catalog(_) | IngestError::Io(_) => {
                return Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", e.to_string());
            }
        };
        Self::bad_request(code, e.to_string())
    }
}

impl From<SyncError> for ApiError {
    fn from(e: SyncError) -> Self {
        match e {
            SyncError::Busy => Self::new(StatusCode::CONFLICT, "job_running", e.to_string()),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "sync_failed", other.to_string()),
        }
    }
}

impl From<RetrieveError> for ApiError {
    fn from(e: RetrieveError) -> Self {
        match e {
            RetrieveError::ZeroK => Self::bad_request("invalid_k", "k must be at least 1"),
            RetrieveError::InvalidLambda(_) => Self::bad_request("invalid_lambda", e.to_string()),
            other => Self::new(StatusCode::SERVICE_UNAVAILABLE, "retrieval_failed", other.to_string()),
        }
    }
}
