use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use f1_core::api::ErrorBody;
use f1_core::{Error, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error(transparent)]
    Domain(#[from] Error),
    #[error("{0}")]
    Unauthorized(&'static str),
    #[error("{0}")]
    Forbidden(&'static str),
    #[error("{0}")]
    BadBody(String),
    #[error("storage failure: {0}")]
    Store(#[from] StoreError),
    #[error("{0}")]
    Internal(String),
}

pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::InvalidEmail
        | Error::Validation(_)
        | Error::TargetIsOrganization
        | Error::NoLocation => StatusCode::UNPROCESSABLE_ENTITY,
        Error::NotFound { .. } => StatusCode::NOT_FOUND,
        Error::NotOwner
        | Error::OwnRequest
        | Error::OrganizationForbidden
        | Error::NotAnOrganization
        | Error::NotAParty
        | Error::NotATarget
        | Error::NotAuthorized => StatusCode::FORBIDDEN,
        Error::LockedOut => StatusCode::LOCKED,
        Error::DuplicateEmail
        | Error::Transition(_)
        | Error::AlreadyTerminal
        | Error::RequestNotOpen
        | Error::AlreadyEngaged
        | Error::NotCompleted
        | Error::AlreadyRated
        | Error::WrongState(_)
        | Error::AlreadyIssued
        | Error::AlreadyResolved => StatusCode::CONFLICT,
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Domain(e) => status_of(e),
            ApiError::Unauthorized(_) => StatusCode::UNAUTHORIZED,
            ApiError::Forbidden(_) => StatusCode::FORBIDDEN,
            ApiError::BadBody(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Store(_) | ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Domain(e) => e.code(),
            ApiError::Unauthorized(_) => "unauthorized",
            ApiError::Forbidden(_) => "forbidden",
            ApiError::BadBody(_) => "bad_request_body",
            ApiError::Store(_) => "storage",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let body = ErrorBody { code: self.code().to_owned(), message: self.to_string() };
        (status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadBody(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::BadBody(r.body_text())
    }
}
