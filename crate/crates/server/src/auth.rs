use axum::extract::FromRequestParts;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use f1_core::{Actor, Id};
use rand::RngCore;

use crate::error::ApiError;
use crate::state::AppState;

/// 32 random bytes from the OS-seeded thread generator, URL-safe base64.
pub fn new_token() -> String {
    let mut bytes = [0u8; 32];
    rand::rng().fill_bytes(&mut bytes);
    URL_SAFE_NO_PAD.encode(bytes)
}

/// Whoever the bearer token belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Caller(pub Actor);

impl Caller {
    /// The caller's user id; the admin token does not act as a user.
    pub fn user(&self) -> Result<Id, ApiError> {
        match &self.0 {
            Actor::User(id) => Ok(id.clone()),
            Actor::Admin => Err(ApiError::Forbidden("admin token cannot act as a user")),
        }
    }

    pub fn require_admin(&self) -> Result<(), ApiError> {
        match self.0 {
            Actor::Admin => Ok(()),
            Actor::User(_) => Err(ApiError::Forbidden("admin only")),
        }
    }
}

fn bearer(parts: &Parts) -> Option<&str> {
    let value = parts.headers.get(AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim()).filter(|t| !t.is_empty())
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = bearer(parts).ok_or(ApiError::Unauthorized("missing bearer token"))?;
        state
            .authenticate(token)
            .map(Caller)
            .ok_or(ApiError::Unauthorized("unknown or expired session"))
    }
}

/// Like [`Caller`] but absent headers are fine.
#[derive(Debug, Clone, PartialEq)]
pub struct MaybeCaller(pub Option<Actor>);

impl FromRequestParts<AppState> for MaybeCaller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        match bearer(parts) {
            None => Ok(MaybeCaller(None)),
            Some(token) => state
                .authenticate(token)
                .map(|a| MaybeCaller(Some(a)))
                .ok_or(ApiError::Unauthorized("unknown or expired session")),
        }
    }
}
