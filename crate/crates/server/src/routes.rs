use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use f1_core::api::{
    BadgeBody, ConfirmProfileBody, DrainBody, DrainRequest, EngagementBody, EventBody,
    KeywordsBody, LoginBody, NewOrganization, NewRequest, NewUser, Profile, RateBody,
    RecordBody, RequestBody, SessionBody, SosBody, SosRequest, UserBody, VerifyKeywordBody,
    VerifyOutcome,
};
use f1_core::{Actor, EmergencyEvent, FavorRequest, GeoPoint, Id, NearbyResult, RadiusMeters};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::auth::{new_token, Caller, MaybeCaller};
use crate::error::ApiError;
use crate::state::AppState;

type ApiResult<T> = Result<T, ApiError>;
type Created<T> = (StatusCode, Json<T>);

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct JsonBody<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct QueryParams<T>(pub T);

/// JSON body that may be left out entirely.
pub struct OptionalJson<T>(pub T);

impl<T, S> FromRequest<S> for OptionalJson<T>
where
    T: DeserializeOwned + Default,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::BadBody(e.to_string()))?;
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Ok(OptionalJson(T::default()));
        }
        serde_json::from_slice(&bytes)
            .map(OptionalJson)
            .map_err(|e| ApiError::BadBody(e.to_string()))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/users", post(create_user))
        .route("/api/users/me", get(me))
        .route("/api/users/me/requests", get(my_requests))
        .route("/api/users/me/alerts", get(my_alerts))
        .route("/api/users/{id}/verify", post(confirm_profile))
        .route("/api/users/{id}/profile", get(profile))
        .route("/api/sessions", post(create_session))
        .route("/api/orgs", post(create_org))
        .route("/api/requests", post(post_request))
        .route("/api/requests/nearby", get(nearby))
        .route("/api/requests/{id}", get(get_request))
        .route("/api/requests/{id}/cancel", post(cancel_request))
        .route("/api/requests/{id}/accept", post(accept))
        .route("/api/engagements/{id}", get(get_engagement))
        .route("/api/engagements/{id}/keys", post(keys))
        .route("/api/engagements/{id}/verify", post(verify_keyword))
        .route("/api/engagements/{id}/complete", post(complete))
        .route("/api/engagements/{id}/cancel", post(cancel_engagement))
        .route("/api/engagements/{id}/rate", post(rate))
        .route("/api/sos", post(raise_sos))
        .route("/api/sos/{id}", get(get_sos))
        .route("/api/sos/{id}/ack", post(ack_sos))
        .route("/api/sos/{id}/resolve", post(resolve_sos))
        .route("/api/admin/outbox/drain", post(drain_outbox))
        .with_state(state)
}

fn created<T>(body: T) -> Created<T> {
    (StatusCode::CREATED, Json(body))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

// ---- accounts -------------------------------------------------------------

async fn create_user(
    State(s): State<AppState>,
    JsonBody(new): JsonBody<NewUser>,
) -> ApiResult<Created<UserBody>> {
    let user = s.write(move |p, now| p.register_user(&new, now)).await?;
    Ok(created(UserBody { user }))
}

async fn create_session(
    State(s): State<AppState>,
    JsonBody(login): JsonBody<LoginBody>,
) -> ApiResult<Created<SessionBody>> {
    let token = new_token();
    let session = s.write(move |p, now| p.open_session(&login.email, token, now)).await?;
    Ok(created(SessionBody {
        token: session.token,
        user_id: session.user_id,
        expires_at: session.expires_at,
    }))
}

async fn create_org(
    State(s): State<AppState>,
    MaybeCaller(caller): MaybeCaller,
    JsonBody(new): JsonBody<NewOrganization>,
) -> ApiResult<Created<UserBody>> {
    if s.admin_token().is_some() {
        match caller {
            Some(Actor::Admin) => {}
            Some(Actor::User(_)) => return Err(ApiError::Forbidden("admin only")),
            None => return Err(ApiError::Unauthorized("missing bearer token")),
        }
    }
    let user = s
        .write(move |p, now| p.register_organization(&new.email, &new.display_name, now))
        .await?;
    Ok(created(UserBody { user }))
}

async fn me(State(s): State<AppState>, caller: Caller) -> ApiResult<Json<UserBody>> {
    let id = caller.user()?;
    let user = s.read(|p, _| p.user(&id).cloned())?;
    Ok(Json(UserBody { user }))
}

async fn my_requests(
    State(s): State<AppState>,
    caller: Caller,
) -> ApiResult<Json<Vec<FavorRequest>>> {
    let id = caller.user()?;
    Ok(Json(s.read(|p, _| p.requests_of(&id))?))
}

/// Unresolved emergencies the caller was alerted about, newest first.
async fn my_alerts(
    State(s): State<AppState>,
    caller: Caller,
) -> ApiResult<Json<Vec<EmergencyEvent>>> {
    let id = caller.user()?;
    let events = s.read(|p, _| {
        let snap = p.snapshot();
        let mut events: Vec<EmergencyEvent> = snap
            .outbox
            .values()
            .filter(|n| n.target_user_id == id)
            .filter_map(|n| snap.emergencies.get(&n.event_id))
            .filter(|e| e.status != f1_core::EmergencyStatus::Resolved)
            .cloned()
            .collect();
        events.sort_by(|a, b| b.raised_at.cmp(&a.raised_at).then_with(|| a.id.cmp(&b.id)));
        events.dedup_by(|a, b| a.id == b.id);
        events
    });
    Ok(Json(events))
}

// ---- trust ----------------------------------------------------------------

/// 201 for a new badge, 200 when the organization had already confirmed.
async fn confirm_profile(
    State(s): State<AppState>,
    caller: Caller,
    Path(target): Path<String>,
    OptionalJson(body): OptionalJson<ConfirmProfileBody>,
) -> ApiResult<(StatusCode, Json<BadgeBody>)> {
    let org = caller.user()?;
    let target = Id::from_raw(target);
    let (badge, existed) = s
        .write(move |p, now| {
            let existed = p.snapshot().badges.contains_key(&(target.clone(), org.clone()));
            let badge = p.confirm_profile(&org, &target, body.note.as_deref(), now)?;
            Ok((badge, existed))
        })
        .await?;
    let status = if existed { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(BadgeBody { badge })))
}

async fn profile(
    State(s): State<AppState>,
    _caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<Profile>> {
    let id = Id::from_raw(id);
    Ok(Json(s.read(|p, _| p.profile(&id))?))
}

// ---- requests -------------------------------------------------------------

async fn post_request(
    State(s): State<AppState>,
    caller: Caller,
    JsonBody(new): JsonBody<NewRequest>,
) -> ApiResult<Created<RequestBody>> {
    let me = caller.user()?;
    let request = s.write(move |p, now| p.post_request(&me, &new, now)).await?;
    Ok(created(RequestBody { request }))
}

#[derive(Debug, Deserialize)]
struct NearbyQuery {
    lat: f64,
    lon: f64,
    radius_m: Option<f64>,
}

async fn nearby(
    State(s): State<AppState>,
    _caller: Caller,
    QueryParams(q): QueryParams<NearbyQuery>,
) -> ApiResult<Json<Vec<NearbyResult>>> {
    let center = GeoPoint::new(q.lat, q.lon)?;
    let radius = match q.radius_m {
        Some(m) => RadiusMeters::new(m)?,
        None => s.default_radius(),
    };
    Ok(Json(s.read(|p, now| p.nearby_requests(center, radius, now))))
}

async fn get_request(
    State(s): State<AppState>,
    _caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<RequestBody>> {
    let id = Id::from_raw(id);
    let request = s.read(|p, _| p.request(&id).cloned())?;
    Ok(Json(RequestBody { request }))
}

async fn cancel_request(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<RequestBody>> {
    let me = caller.user()?;
    let id = Id::from_raw(id);
    let request = s.write(move |p, now| p.cancel_request(&id, &me, now)).await?;
    Ok(Json(RequestBody { request }))
}

async fn accept(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Created<EngagementBody>> {
    let me = caller.user()?;
    let id = Id::from_raw(id);
    let engagement = s.write(move |p, now| p.accept(&id, &me, now)).await?;
    Ok(created(EngagementBody { engagement }))
}

// ---- engagements ----------------------------------------------------------

async fn get_engagement(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<EngagementBody>> {
    let id = Id::from_raw(id);
    let engagement = s.read(|p, _| {
        let e = p.engagement(&id)?;
        if let Actor::User(me) = &caller.0 {
            let (volunteer, requester) = p.parties(e);
            if me != &volunteer && me != &requester {
                return Err(f1_core::Error::NotAParty);
            }
        }
        Ok::<_, f1_core::Error>(e.clone())
    })?;
    Ok(Json(EngagementBody { engagement }))
}

/// Issues the pair on first call; later calls read the same pair back.
async fn keys(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<KeywordsBody>> {
    let me = caller.user()?;
    let id = Id::from_raw(id);
    let pair = s
        .write(move |p, now| match p.keywords(&id, &me)? {
            Some(pair) => Ok(pair),
            None => p.issue_keywords(&id, &me, now),
        })
        .await?;
    Ok(Json(KeywordsBody::from(&pair)))
}

async fn verify_keyword(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    JsonBody(body): JsonBody<VerifyKeywordBody>,
) -> ApiResult<Json<VerifyOutcome>> {
    let me = caller.user()?;
    let id = Id::from_raw(id);
    let outcome = s
        .write(move |p, now| p.verify_keyword(&id, &me, body.speaker_role, &body.spoken, now))
        .await?;
    Ok(Json(outcome))
}

async fn complete(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<EngagementBody>> {
    let me = caller.user()?;
    let id = Id::from_raw(id);
    let engagement = s.write(move |p, now| p.complete(&id, &me, now)).await?;
    Ok(Json(EngagementBody { engagement }))
}

async fn cancel_engagement(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<EngagementBody>> {
    let me = caller.user()?;
    let id = Id::from_raw(id);
    let engagement = s.write(move |p, now| p.cancel_engagement(&id, &me, now)).await?;
    Ok(Json(EngagementBody { engagement }))
}

async fn rate(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    JsonBody(body): JsonBody<RateBody>,
) -> ApiResult<Created<RecordBody>> {
    let me = caller.user()?;
    let id = Id::from_raw(id);
    let record = s.write(move |p, now| p.submit_rating(&id, &me, body.grade, now)).await?;
    Ok(created(RecordBody { record }))
}

// ---- emergencies ----------------------------------------------------------

/// 201 for a new event, 200 when the press folded into a recent one.
async fn raise_sos(
    State(s): State<AppState>,
    caller: Caller,
    OptionalJson(body): OptionalJson<SosRequest>,
) -> ApiResult<(StatusCode, Json<SosBody>)> {
    let me = caller.user()?;
    let out = s.write(move |p, now| p.raise_sos(&me, body.location, now)).await?;
    let status = if out.created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(SosBody { event: out.event, created: out.created, notified: out.notified })))
}

async fn get_sos(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<EventBody>> {
    let id = Id::from_raw(id);
    let event = s.read(|p, _| {
        let event = p.emergency(&id)?.clone();
        if let Actor::User(me) = &caller.0 {
            if me != &event.user_id && !p.notified_for(&id).contains(me) {
                return Err(f1_core::Error::NotAuthorized);
            }
        }
        Ok::<_, f1_core::Error>(event)
    })?;
    Ok(Json(EventBody { event }))
}

async fn ack_sos(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<EventBody>> {
    let me = caller.user()?;
    let id = Id::from_raw(id);
    let event = s.write(move |p, now| p.acknowledge_sos(&id, &me, now)).await?;
    Ok(Json(EventBody { event }))
}

async fn resolve_sos(
    State(s): State<AppState>,
    Caller(actor): Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<EventBody>> {
    let id = Id::from_raw(id);
    let event = s.write(move |p, now| p.resolve_sos(&id, &actor, now)).await?;
    Ok(Json(EventBody { event }))
}

async fn drain_outbox(
    State(s): State<AppState>,
    caller: Caller,
    JsonBody(body): JsonBody<DrainRequest>,
) -> ApiResult<Json<DrainBody>> {
    caller.require_admin()?;
    let delivered = s.write(move |p, now| Ok(p.drain_outbox(body.max, now))).await?;
    Ok(Json(DrainBody { delivered }))
}
