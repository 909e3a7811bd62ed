//! Typed HTTP client for the F1 service, plus the line-based scenario runner
//! used for smoke tests.

pub mod scenario;

use f1_core::api::{
    BadgeBody, ConfirmProfileBody, DrainBody, DrainRequest, EngagementBody, ErrorBody, EventBody,
    KeywordsBody, LoginBody, NewOrganization, NewRequest, NewUser, Profile, RateBody, RecordBody,
    RequestBody, SessionBody, SosBody, SosRequest, UserBody, VerifyKeywordBody, VerifyOutcome,
};
use f1_core::{EmergencyEvent, FavorRequest, GeoPoint, LikertGrade, NearbyResult, SpeakerRole};
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// Connection refused, DNS failure, timeout and the like.
    #[error("service unreachable: {0}")]
    Unreachable(String),
    #[error("{status}: {} ({})", body.code, body.message)]
    Api { status: u16, body: ErrorBody },
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            _ => None,
        }
    }

    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.code),
            _ => None,
        }
    }
}

fn transport(e: reqwest::Error) -> ClientError {
    if e.is_decode() || e.is_body() {
        ClientError::Decode(e.to_string())
    } else {
        ClientError::Unreachable(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

/// One caller's view of the service. Cheap to clone; clones share the
/// connection pool.
#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
    token: Option<String>,
}

impl Client {
    pub fn new(base_url: &str) -> Self {
        Client {
            http: reqwest::Client::new(),
            base: base_url.trim_end_matches('/').to_owned(),
            token: None,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    /// Same connection pool, different bearer token.
    pub fn with_token(&self, token: impl Into<String>) -> Self {
        Client { token: Some(token.into()), ..self.clone() }
    }

    pub fn anonymous(&self) -> Self {
        Client { token: None, ..self.clone() }
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    /// Sends a request and returns the status and the parsed body (`Null`
    /// when empty). Non-2xx statuses are not errors here.
    pub async fn raw(&self, method: Method, path: &str, body: Option<&Value>) -> Result<(u16, Value)> {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await.map_err(transport)?;
        let status = resp.status().as_u16();
        let bytes = resp.bytes().await.map_err(transport)?;
        if bytes.is_empty() {
            return Ok((status, Value::Null));
        }
        let value = serde_json::from_slice(&bytes)
            .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()));
        Ok((status, value))
    }

    async fn call<B: Serialize, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T> {
        let body = body
            .map(serde_json::to_value)
            .transpose()
            .map_err(|e| ClientError::Decode(e.to_string()))?;
        let (status, value) = self.raw(method, path, body.as_ref()).await?;
        if !StatusCode::from_u16(status).is_ok_and(|s| s.is_success()) {
            let body = serde_json::from_value(value.clone()).unwrap_or(ErrorBody {
                code: "http".into(),
                message: value.to_string(),
            });
            return Err(ClientError::Api { status, body });
        }
        serde_json::from_value(value).map_err(|e| ClientError::Decode(e.to_string()))
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.call::<(), T>(Method::GET, path, None).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        self.call(Method::POST, path, Some(body)).await
    }

    async fn post_empty<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.call::<(), T>(Method::POST, path, None).await
    }

    pub async fn health(&self) -> Result<()> {
        let v: Value = self.get("/api/health").await?;
        match v.get("status").and_then(Value::as_str) {
            Some("ok") => Ok(()),
            _ => Err(ClientError::Decode(format!("unhealthy: {v}"))),
        }
    }

    pub async fn register(&self, new: &NewUser) -> Result<UserBody> {
        self.post("/api/users", new).await
    }

    pub async fn register_organization(&self, new: &NewOrganization) -> Result<UserBody> {
        self.post("/api/orgs", new).await
    }

    /// Opens a session and returns a client bound to it.
    pub async fn login(&self, email: &str) -> Result<(SessionBody, Client)> {
        let s: SessionBody = self.post("/api/sessions", &LoginBody { email: email.into() }).await?;
        let client = self.with_token(s.token.clone());
        Ok((s, client))
    }

    pub async fn me(&self) -> Result<UserBody> {
        self.get("/api/users/me").await
    }

    pub async fn my_requests(&self) -> Result<Vec<FavorRequest>> {
        self.get("/api/users/me/requests").await
    }

    pub async fn my_alerts(&self) -> Result<Vec<EmergencyEvent>> {
        self.get("/api/users/me/alerts").await
    }

    pub async fn confirm_profile(&self, user_id: &str, note: Option<&str>) -> Result<BadgeBody> {
        let body = ConfirmProfileBody { note: note.map(str::to_owned) };
        self.post(&format!("/api/users/{user_id}/verify"), &body).await
    }

    pub async fn profile(&self, user_id: &str) -> Result<Profile> {
        self.get(&format!("/api/users/{user_id}/profile")).await
    }

    pub async fn post_request(&self, new: &NewRequest) -> Result<RequestBody> {
        self.post("/api/requests", new).await
    }

    pub async fn nearby(&self, at: GeoPoint, radius_m: Option<f64>) -> Result<Vec<NearbyResult>> {
        let mut path = format!("/api/requests/nearby?lat={}&lon={}", at.latitude(), at.longitude());
        if let Some(r) = radius_m {
            path.push_str(&format!("&radius_m={r}"));
        }
        self.get(&path).await
    }

    pub async fn request(&self, id: &str) -> Result<RequestBody> {
        self.get(&format!("/api/requests/{id}")).await
    }

    pub async fn cancel_request(&self, id: &str) -> Result<RequestBody> {
        self.post_empty(&format!("/api/requests/{id}/cancel")).await
    }

    pub async fn accept(&self, request_id: &str) -> Result<EngagementBody> {
        self.post_empty(&format!("/api/requests/{request_id}/accept")).await
    }

    pub async fn engagement(&self, id: &str) -> Result<EngagementBody> {
        self.get(&format!("/api/engagements/{id}")).await
    }

    pub async fn keys(&self, engagement_id: &str) -> Result<KeywordsBody> {
        self.post_empty(&format!("/api/engagements/{engagement_id}/keys")).await
    }

    pub async fn verify_keyword(
        &self,
        engagement_id: &str,
        speaker_role: SpeakerRole,
        spoken: &str,
    ) -> Result<VerifyOutcome> {
        let body = VerifyKeywordBody { speaker_role, spoken: spoken.into() };
        self.post(&format!("/api/engagements/{engagement_id}/verify"), &body).await
    }

    pub async fn complete(&self, engagement_id: &str) -> Result<EngagementBody> {
        self.post_empty(&format!("/api/engagements/{engagement_id}/complete")).await
    }

    pub async fn cancel_engagement(&self, engagement_id: &str) -> Result<EngagementBody> {
        self.post_empty(&format!("/api/engagements/{engagement_id}/cancel")).await
    }

    pub async fn rate(&self, engagement_id: &str, grade: LikertGrade) -> Result<RecordBody> {
        self.post(&format!("/api/engagements/{engagement_id}/rate"), &RateBody { grade }).await
    }

    pub async fn sos(&self, location: Option<GeoPoint>) -> Result<SosBody> {
        self.post("/api/sos", &SosRequest { location }).await
    }

    pub async fn sos_event(&self, id: &str) -> Result<EventBody> {
        self.get(&format!("/api/sos/{id}")).await
    }

    pub async fn acknowledge_sos(&self, id: &str) -> Result<EventBody> {
        self.post_empty(&format!("/api/sos/{id}/ack")).await
    }

    pub async fn resolve_sos(&self, id: &str) -> Result<EventBody> {
        self.post_empty(&format!("/api/sos/{id}/resolve")).await
    }

    pub async fn drain_outbox(&self, max: usize) -> Result<DrainBody> {
        self.post("/api/admin/outbox/drain", &DrainRequest { max }).await
    }
}
