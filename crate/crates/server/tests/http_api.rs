use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Duration, TimeZone, Utc};
use f1_core::api::{NewRequest, NewUser};
use f1_core::{
    Collection, FileStore, Id, LikertGrade, MemoryStore, Platform, PlatformConfig, Snapshot,
    SnapshotStore, SpeakerRole, StoreError, Wordlist,
};
use f1_server::{router, AppState, ManualClock, ServerConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 6, 1, 9, 0, 0).unwrap()
}

struct App {
    router: Router,
    state: AppState,
    clock: Arc<ManualClock>,
}

fn config() -> ServerConfig {
    ServerConfig { keyword_seed: Some(77), ..ServerConfig::default() }
}

fn app_with(config: ServerConfig, store: Box<dyn SnapshotStore>) -> App {
    let clock = Arc::new(ManualClock::new(t0()));
    let state = AppState::with_store(&config, store, clock.clone()).unwrap();
    App { router: router(state.clone()), state, clock }
}

fn app() -> App {
    app_with(config(), Box::new(MemoryStore::new()))
}

impl App {
    async fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    async fn get(&self, path: &str, token: &str) -> (StatusCode, Value) {
        self.call(Method::GET, path, Some(token), None).await
    }

    async fn post(&self, path: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, Some(token), Some(body)).await
    }

    async fn post_empty(&self, path: &str, token: &str) -> (StatusCode, Value) {
        self.call(Method::POST, path, Some(token), None).await
    }

    /// Registers a user and logs in; returns (id, token).
    async fn signup(&self, email: &str, name: &str, home: Option<(f64, f64)>) -> (String, String) {
        let mut body = json!({ "email": email, "display_name": name });
        if let Some((lat, lon)) = home {
            body["home_location"] = json!({ "latitude": lat, "longitude": lon });
        }
        let (status, user) = self.call(Method::POST, "/api/users", None, Some(body)).await;
        assert_eq!(status, StatusCode::CREATED, "{user}");
        let token = self.login(email).await;
        (user["user"]["id"].as_str().unwrap().to_owned(), token)
    }

    async fn org(&self, email: &str, name: &str) -> (String, String) {
        let body = json!({ "email": email, "display_name": name });
        let (status, user) = self.call(Method::POST, "/api/orgs", None, Some(body)).await;
        assert_eq!(status, StatusCode::CREATED, "{user}");
        (user["user"]["id"].as_str().unwrap().to_owned(), self.login(email).await)
    }

    async fn login(&self, email: &str) -> String {
        let (status, s) = self.call(Method::POST, "/api/sessions", None, Some(json!({ "email": email }))).await;
        assert_eq!(status, StatusCode::CREATED, "{s}");
        s["token"].as_str().unwrap().to_owned()
    }

    fn snapshot(&self) -> Snapshot {
        self.state.read(|p, _| p.snapshot().clone())
    }
}

fn request_body(expires_in_hours: i64) -> Value {
    json!({
        "title": "Carry groceries",
        "description": "Third floor",
        "location": { "latitude": 52.2297, "longitude": 21.0122 },
        "expires_at": t0() + Duration::hours(expires_in_hours),
    })
}

#[tokio::test]
async fn health_is_public() {
    let app = app();
    let (status, body) = app.call(Method::GET, "/api/health", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn signup_errors() {
    let app = app();
    app.signup("anna@example.pl", "Anna", None).await;
    let dup = json!({ "email": "ANNA@example.pl", "display_name": "A" });
    let (status, body) = app.call(Method::POST, "/api/users", None, Some(dup)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "duplicate_email");
    assert!(body["message"].is_string());

    let bad = json!({ "email": "not-an-email", "display_name": "A" });
    let (status, body) = app.call(Method::POST, "/api/users", None, Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid_email");

    let (status, body) = app.call(Method::POST, "/api/users", None, Some(json!({ "oops": 1 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "bad_request_body");

    let badloc = json!({ "email": "b@example.pl", "display_name": "B", "home_location": { "latitude": 91, "longitude": 0 } });
    let (status, _) = app.call(Method::POST, "/api/users", None, Some(badloc)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = app.call(Method::POST, "/api/sessions", None, Some(json!({ "email": "who@example.pl" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
}

#[tokio::test]
async fn tokens_are_required_and_expire() {
    let app = app();
    let (_, token) = app.signup("anna@example.pl", "Anna", None).await;
    assert_eq!(app.call(Method::GET, "/api/users/me", None, None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(app.get("/api/users/me", "bogus").await.0, StatusCode::UNAUTHORIZED);
    let (status, me) = app.get("/api/users/me", &token).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(me["user"]["email"], "anna@example.pl");
    assert_eq!(token.len(), 43);

    app.clock.advance(Duration::hours(24));
    let (status, body) = app.get("/api/users/me", &token).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(body["code"], "unauthorized");
}

#[tokio::test]
async fn organizations_cannot_post_requests() {
    let app = app();
    let (_, org) = app.org("office@school.edu.pl", "School").await;
    let (status, body) = app.post("/api/requests", &org, request_body(24)).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(body["code"], "organization_forbidden");
}

#[tokio::test]
async fn nearby_validates_query() {
    let app = app();
    let (_, token) = app.signup("anna@example.pl", "Anna", None).await;
    let (status, body) = app.get("/api/requests/nearby?lat=52.2&lon=21.0&radius_m=200000", &token).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "validation");
    assert_eq!(app.get("/api/requests/nearby?lon=21.0", &token).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(app.get("/api/requests/nearby?lat=95&lon=21.0", &token).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, body) = app.get("/api/requests/nearby?lat=52.2&lon=21.0", &token).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!([]));
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let app = app();
    let (_, token) = app.signup("anna@example.pl", "Anna", None).await;
    assert_eq!(app.get("/api/users/usr-0000009999/profile", &token).await.0, StatusCode::NOT_FOUND);
    assert_eq!(app.get("/api/requests/req-0000009999", &token).await.0, StatusCode::NOT_FOUND);
    assert_eq!(app.post_empty("/api/requests/nope/accept", &token).await.0, StatusCode::NOT_FOUND);
    assert_eq!(app.post_empty("/api/engagements/nope/keys", &token).await.0, StatusCode::NOT_FOUND);
    assert_eq!(app.post_empty("/api/sos/nope/ack", &token).await.0, StatusCode::NOT_FOUND);
}

/// Everything the happy path needs, returned for further poking.
struct Story {
    app: App,
    senior: (String, String),
    volunteer: (String, String),
    org: (String, String),
    request: String,
    engagement: String,
}

async fn story_until_accept() -> Story {
    let app = app();
    let senior = app.signup("anna@example.pl", "Anna", Some((52.2297, 21.0122))).await;
    let volunteer = app.signup("kuba@example.pl", "Kuba", Some((52.2300, 21.0100))).await;
    let org = app.org("office@school.edu.pl", "School No. 7").await;
    let (status, badge) = app
        .post(&format!("/api/users/{}/verify", volunteer.0), &org.1, json!({ "note": "3B" }))
        .await;
    assert_eq!(status, StatusCode::CREATED, "{badge}");
    let (status, req) = app.post("/api/requests", &senior.1, request_body(24)).await;
    assert_eq!(status, StatusCode::CREATED);
    let request = req["request"]["id"].as_str().unwrap().to_owned();
    let (status, eng) = app.post_empty(&format!("/api/requests/{request}/accept"), &volunteer.1).await;
    assert_eq!(status, StatusCode::CREATED, "{eng}");
    assert_eq!(eng["engagement"]["state"], "Accepted");
    let engagement = eng["engagement"]["id"].as_str().unwrap().to_owned();
    Story { app, senior, volunteer, org, request, engagement }
}

#[tokio::test]
async fn happy_path_matches_module_replay() {
    let s = story_until_accept().await;
    let app = &s.app;

    let (status, nearby) = app.get("/api/requests/nearby?lat=52.23&lon=21.01&radius_m=5000", &s.volunteer.1).await;
    assert_eq!(status, StatusCode::OK);
    // accepted requests leave the map
    assert_eq!(nearby, json!([]));

    let (status, keys) = app.post_empty(&format!("/api/engagements/{}/keys", s.engagement), &s.senior.1).await;
    assert_eq!(status, StatusCode::OK);
    let (status, again) = app.post_empty(&format!("/api/engagements/{}/keys", s.engagement), &s.volunteer.1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(keys, again);
    assert_ne!(keys["volunteer_word"], keys["requester_word"]);

    let spoken = format!(" {} ", keys["volunteer_word"].as_str().unwrap().to_uppercase());
    let (status, out) = app
        .post(
            &format!("/api/engagements/{}/verify", s.engagement),
            &s.senior.1,
            json!({ "speaker_role": "Volunteer", "spoken": spoken }),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out, json!({ "ok": true, "state": "Authenticated" }));

    let (status, done) = app.post_empty(&format!("/api/engagements/{}/complete", s.engagement), &s.volunteer.1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(done["engagement"]["state"], "Completed");

    let rate = |grade| json!({ "grade": grade });
    let (status, _) = app.post(&format!("/api/engagements/{}/rate", s.engagement), &s.senior.1, rate(5)).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, body) = app.post(&format!("/api/engagements/{}/rate", s.engagement), &s.senior.1, rate(4)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "already_rated");
    let (status, _) = app.post(&format!("/api/engagements/{}/rate", s.engagement), &s.volunteer.1, rate(4)).await;
    assert_eq!(status, StatusCode::CREATED);

    let (_, eng) = app.get(&format!("/api/engagements/{}", s.engagement), &s.senior.1).await;
    assert_eq!(eng["engagement"]["state"], "Closed");
    let (_, profile) = app.get(&format!("/api/users/{}/profile", s.volunteer.0), &s.senior.1).await;
    assert_eq!(profile["reputation_sum"], 2);
    assert_eq!(profile["verified"], true);
    assert_eq!(profile["badges"][0]["org_name"], "School No. 7");
    let (_, profile) = app.get(&format!("/api/users/{}/profile", s.senior.0), &s.senior.1).await;
    assert_eq!(profile["reputation_sum"], 1);

    // replay the same calls against the module directly
    let over_http = app.snapshot();
    let mut p = Platform::new(
        Arc::new(Wordlist::sample()),
        PlatformConfig { keyword_seed: Some(77), ..PlatformConfig::default() },
    );
    let now = t0();
    let user = |email: &str, name: &str, lat, lon| NewUser {
        email: email.into(),
        display_name: name.into(),
        home_location: Some(f1_core::GeoPoint::new(lat, lon).unwrap()),
    };
    let senior = p.register_user(&user("anna@example.pl", "Anna", 52.2297, 21.0122), now).unwrap().id;
    let token_of = |uid: &str| {
        over_http.sessions.values().find(|x| x.user_id.as_str() == uid).unwrap().token.clone()
    };
    p.open_session("anna@example.pl", token_of(&s.senior.0), now).unwrap();
    let vol = p.register_user(&user("kuba@example.pl", "Kuba", 52.2300, 21.0100), now).unwrap().id;
    p.open_session("kuba@example.pl", token_of(&s.volunteer.0), now).unwrap();
    let org = p.register_organization("office@school.edu.pl", "School No. 7", now).unwrap().id;
    p.open_session("office@school.edu.pl", token_of(&s.org.0), now).unwrap();
    p.confirm_profile(&org, &vol, Some("3B"), now).unwrap();
    let new = NewRequest {
        title: "Carry groceries".into(),
        description: "Third floor".into(),
        location: f1_core::GeoPoint::new(52.2297, 21.0122).unwrap(),
        expires_at: now + Duration::hours(24),
    };
    let r = p.post_request(&senior, &new, now).unwrap().id;
    let e = p.accept(&r, &vol, now).unwrap().id;
    let pair = p.issue_keywords(&e, &senior, now).unwrap();
    p.verify_keyword(&e, &senior, SpeakerRole::Volunteer, &pair.volunteer_word, now).unwrap();
    p.complete(&e, &vol, now).unwrap();
    p.submit_rating(&e, &senior, LikertGrade::new(5).unwrap(), now).unwrap();
    p.submit_rating(&e, &vol, LikertGrade::new(4).unwrap(), now).unwrap();
    assert_eq!(Id::from_raw(s.request.clone()), r);
    assert_eq!(&over_http, p.snapshot());
}

#[tokio::test]
async fn accept_replay_does_not_duplicate() {
    let s = story_until_accept().await;
    let (status, body) = s.app.post_empty(&format!("/api/requests/{}/accept", s.request), &s.volunteer.1).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "already_engaged");
    assert_eq!(s.app.snapshot().engagements.len(), 1);
    let (status, _) = s.app.post_empty(&format!("/api/requests/{}/accept", s.request), &s.senior.1).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn engagement_is_private_to_parties() {
    let s = story_until_accept().await;
    let (status, _) = s.app.get(&format!("/api/engagements/{}", s.engagement), &s.org.1).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = s.app.post_empty(&format!("/api/engagements/{}/keys", s.engagement), &s.org.1).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn lockout_is_423() {
    let s = story_until_accept().await;
    let path = format!("/api/engagements/{}/verify", s.engagement);
    // verifying before keys exist is a state conflict
    let wrong = json!({ "speaker_role": "Volunteer", "spoken": "zzz" });
    assert_eq!(s.app.post(&path, &s.senior.1, wrong.clone()).await.0, StatusCode::CONFLICT);
    s.app.post_empty(&format!("/api/engagements/{}/keys", s.engagement), &s.senior.1).await;
    for _ in 0..5 {
        let (status, out) = s.app.post(&path, &s.senior.1, wrong.clone()).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(out["ok"], false);
    }
    let (status, body) = s.app.post(&path, &s.senior.1, wrong).await;
    assert_eq!(status, StatusCode::LOCKED);
    assert_eq!(body["code"], "locked_out");
    let bad_role = json!({ "speaker_role": "Neighbor", "spoken": "kot" });
    assert_eq!(s.app.post(&path, &s.senior.1, bad_role).await.0, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn cancel_paths() {
    let s = story_until_accept().await;
    let (status, body) = s.app.post_empty(&format!("/api/requests/{}/cancel", s.request), &s.volunteer.1).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(body["code"], "not_owner");
    let (status, eng) = s.app.post_empty(&format!("/api/engagements/{}/cancel", s.engagement), &s.volunteer.1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(eng["engagement"]["state"], "Cancelled");
    let (_, req) = s.app.get(&format!("/api/requests/{}", s.request), &s.senior.1).await;
    assert_eq!(req["request"]["status"], "Open");
    let (status, body) = s.app.post_empty(&format!("/api/engagements/{}/cancel", s.engagement), &s.volunteer.1).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "terminal_state");
    let (status, req) = s.app.post_empty(&format!("/api/requests/{}/cancel", s.request), &s.senior.1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(req["request"]["status"], "Cancelled");
    let (status, _) = s.app.post_empty(&format!("/api/requests/{}/cancel", s.request), &s.senior.1).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn badge_confirmation_is_idempotent() {
    let s = story_until_accept().await;
    let path = format!("/api/users/{}/verify", s.volunteer.0);
    let (status, again) = s.app.post_empty(&path, &s.org.1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["badge"]["note"], "3B");
    let (status, body) = s.app.post_empty(&path, &s.senior.1).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(body["code"], "not_an_organization");
}

#[tokio::test]
async fn my_requests_newest_first() {
    let s = story_until_accept().await;
    s.app.clock.advance(Duration::minutes(5));
    let (_, second) = s.app.post("/api/requests", &s.senior.1, request_body(24)).await;
    let (status, list) = s.app.get("/api/users/me/requests", &s.senior.1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list[0]["id"], second["request"]["id"]);
    assert_eq!(list[1]["id"], s.request.as_str());
}

#[tokio::test]
async fn sos_round_trip() {
    let s = story_until_accept().await;
    let app = &s.app;
    let (status, first) = app.post_empty("/api/sos", &s.senior.1).await;
    assert_eq!(status, StatusCode::CREATED, "{first}");
    assert_eq!(first["notified"], 1);
    app.clock.advance(Duration::seconds(30));
    let (status, second) = app.post("/api/sos", &s.senior.1, json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(second["event"]["id"], first["event"]["id"]);
    let id = first["event"]["id"].as_str().unwrap();

    let (_, alerts) = app.get("/api/users/me/alerts", &s.volunteer.1).await;
    assert_eq!(alerts[0]["id"], id);
    assert_eq!(app.get(&format!("/api/sos/{id}"), &s.org.1).await.0, StatusCode::FORBIDDEN);
    let (status, body) = app.post_empty(&format!("/api/sos/{id}/ack"), &s.org.1).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(body["code"], "not_a_target");
    let (status, ev) = app.post_empty(&format!("/api/sos/{id}/ack"), &s.volunteer.1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ev["event"]["status"], "Acknowledged");
    assert_eq!(app.post_empty(&format!("/api/sos/{id}/resolve"), &s.volunteer.1).await.0, StatusCode::FORBIDDEN);
    let (status, ev) = app.post_empty(&format!("/api/sos/{id}/resolve"), &s.senior.1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ev["event"]["status"], "Resolved");
    assert_eq!(app.post_empty(&format!("/api/sos/{id}/resolve"), &s.senior.1).await.0, StatusCode::CONFLICT);
    let (_, alerts) = app.get("/api/users/me/alerts", &s.volunteer.1).await;
    assert_eq!(alerts, json!([]));

    let (_, nomad) = app.signup("tom@example.pl", "Tom", None).await;
    let (status, body) = app.post_empty("/api/sos", &nomad).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "no_location");
}

#[tokio::test]
async fn admin_token_gates_orgs_and_drain() {
    let app = app_with(
        ServerConfig { admin_token: Some("root-secret".into()), ..config() },
        Box::new(MemoryStore::new()),
    );
    let body = json!({ "email": "o@example.org", "display_name": "O" });
    assert_eq!(app.call(Method::POST, "/api/orgs", None, Some(body.clone())).await.0, StatusCode::UNAUTHORIZED);
    let (_, user) = app.signup("anna@example.pl", "Anna", Some((52.0, 21.0))).await;
    assert_eq!(app.post("/api/orgs", &user, body.clone()).await.0, StatusCode::FORBIDDEN);
    assert_eq!(app.post("/api/orgs", "root-secret", body).await.0, StatusCode::CREATED);

    assert_eq!(app.post("/api/admin/outbox/drain", &user, json!({ "max": 5 })).await.0, StatusCode::FORBIDDEN);
    let (status, out) = app.post("/api/admin/outbox/drain", "root-secret", json!({ "max": 5 })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["delivered"], json!([]));
    assert_eq!(app.post_empty("/api/sos", "root-secret").await.0, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn concurrent_drains_deliver_each_row_once() {
    let app = app_with(
        ServerConfig { admin_token: Some("adm".into()), ..config() },
        Box::new(MemoryStore::new()),
    );
    let org_body = json!({ "email": "o@example.org", "display_name": "O" });
    let (_, org) = app.post("/api/orgs", "adm", org_body).await;
    let org_token = app.login("o@example.org").await;
    let org_id = org["user"]["id"].as_str().unwrap().to_owned();
    let _ = org_id;
    let mut raisers = Vec::new();
    for i in 0..12 {
        let (id, token) = app.signup(&format!("v{i}@example.pl"), "V", Some((52.0, 21.0 + i as f64 * 1e-4))).await;
        app.post_empty(&format!("/api/users/{id}/verify"), &org_token).await;
        raisers.push(token);
    }
    for token in &raisers {
        assert_eq!(app.post_empty("/api/sos", token).await.0, StatusCode::CREATED);
    }
    let pending = app.snapshot().outbox.len();
    assert_eq!(pending, 12 * 11);

    let mut tasks = Vec::new();
    for _ in 0..40 {
        let router = app.router.clone();
        tasks.push(tokio::spawn(async move {
            let req = Request::post("/api/admin/outbox/drain")
                .header(header::AUTHORIZATION, "Bearer adm")
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(r#"{"max":5}"#))
                .unwrap();
            let resp = router.oneshot(req).await.unwrap();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes();
            let v: Value = serde_json::from_slice(&bytes).unwrap();
            v["delivered"].as_array().unwrap().iter().map(|n| n["id"].as_str().unwrap().to_owned()).collect::<Vec<_>>()
        }));
    }
    let mut seen = Vec::new();
    for t in tasks {
        seen.extend(t.await.unwrap());
    }
    let unique: BTreeSet<&String> = seen.iter().collect();
    assert_eq!(unique.len(), seen.len());
    assert_eq!(seen.len(), pending.min(40 * 5));
}

/// Store that can be told to fail saves.
#[derive(Default)]
struct FlakyStore {
    inner: MemoryStore,
    fail: AtomicBool,
}

struct Flaky(Arc<FlakyStore>);

impl SnapshotStore for Flaky {
    fn save(&self, snapshot: &Snapshot, changed: &BTreeSet<Collection>) -> Result<(), StoreError> {
        if self.0.fail.load(Ordering::SeqCst) {
            return Err(StoreError::Integrity("disk on fire".into()));
        }
        self.0.inner.save(snapshot, changed)
    }

    fn load(&self) -> Result<Snapshot, StoreError> {
        self.0.inner.load()
    }
}

#[tokio::test]
async fn failed_save_rolls_back_memory() {
    let store = Arc::new(FlakyStore::default());
    let app = app_with(config(), Box::new(Flaky(store.clone())));
    let (_, token) = app.signup("anna@example.pl", "Anna", Some((52.0, 21.0))).await;
    let before = app.snapshot();
    store.fail.store(true, Ordering::SeqCst);
    let (status, body) = app.post("/api/requests", &token, request_body(5)).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(body["code"], "storage");
    assert_eq!(app.snapshot(), before);
    store.fail.store(false, Ordering::SeqCst);
    assert_eq!(app.post("/api/requests", &token, request_body(5)).await.0, StatusCode::CREATED);
    assert_eq!(&store.inner.load().unwrap(), &app.snapshot());
}

#[tokio::test]
async fn acknowledged_writes_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServerConfig { data_dir: Some(dir.path().into()), ..config() };
    let first = app_with(cfg.clone(), Box::new(FileStore::open(dir.path()).unwrap()));
    let s_token = first.signup("anna@example.pl", "Anna", Some((52.0, 21.0))).await.1;
    let (_, req) = first.post("/api/requests", &s_token, request_body(5)).await;
    let written = first.snapshot();
    drop(first);

    let second = app_with(cfg, Box::new(FileStore::open(dir.path()).unwrap()));
    assert_eq!(second.snapshot(), written);
    let (status, again) = second.get(&format!("/api/requests/{}", req["request"]["id"].as_str().unwrap()), &s_token).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["request"], req["request"]);
}

#[tokio::test]
async fn corrupt_store_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServerConfig { data_dir: Some(dir.path().into()), ..config() };
    {
        let app = app_with(cfg.clone(), Box::new(FileStore::open(dir.path()).unwrap()));
        app.signup("anna@example.pl", "Anna", None).await;
    }
    let users = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with("users."))
        .unwrap();
    let bytes = std::fs::read(&users).unwrap();
    std::fs::write(&users, &bytes[..bytes.len() - 10]).unwrap();
    let err = AppState::open(&cfg).unwrap_err();
    assert!(matches!(err, f1_server::StartError::Store(StoreError::CorruptStore { .. })), "{err}");
}

#[tokio::test]
async fn expiry_runs_through_sweep() {
    let app = app();
    let (_, token) = app.signup("anna@example.pl", "Anna", None).await;
    let (_, req) = app.post("/api/requests", &token, request_body(1)).await;
    app.clock.advance(Duration::hours(2));
    app.state.write(|p, now| Ok(p.sweep(now))).await.unwrap();
    let (_, after) = app.get(&format!("/api/requests/{}", req["request"]["id"].as_str().unwrap()), &token).await;
    assert_eq!(after["request"]["status"], "Expired");
}
