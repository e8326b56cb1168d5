use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tod_core::engine::{Engine, EngineConfig};
use tod_service::cli::load_backend;
use tod_service::http::{router, AppState, SessionStore};
use tower::ServiceExt;

fn engine() -> Engine {
    let db = Arc::new(tod_core::data::database().unwrap());
    let backend = load_backend("scripted:perfect", &db).unwrap();
    Engine::new(backend, db, EngineConfig::default())
}

fn app(engine: Option<Engine>) -> (Router, AppState) {
    let state = AppState::new(engine, SessionStore::new(Duration::from_secs(60), 0));
    (router(state.clone()), state)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/session", None).await;
    assert_eq!(status, StatusCode::CREATED);
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn message_round_trip() {
    let (app, _) = app(Some(engine()));
    let id = new_session(&app).await;
    let (status, turn) = call(&app, "POST", &format!("/session/{id}/message"), Some(json!({"text": "i want a place to stay ."}))).await;
    assert_eq!(status, StatusCode::OK, "{turn}");
    assert_eq!(turn["domain"], "hotel");
    for field in ["response", "raw_response", "belief", "db_match", "db_bucket", "template", "tolerance_events"] {
        assert!(turn.get(field).is_some(), "{field}");
    }

    let (status, session) = call(&app, "GET", &format!("/session/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let transcript = session["transcript"].as_array().unwrap();
    assert_eq!(transcript.len(), 2);
    assert_eq!(transcript[0]["text"], "i want a place to stay .");
    assert_eq!(transcript[1]["text"], turn["raw_response"]);
    assert_eq!(session["turns"].as_array().unwrap().len(), 1);

    let (status, _) = call(&app, "DELETE", &format!("/session/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&app, "DELETE", &format!("/session/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn error_statuses() {
    let (app, _) = app(Some(engine()));
    let (status, _) = call(&app, "POST", "/session/nope/message", Some(json!({"text": "hi"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "GET", "/session/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let id = new_session(&app).await;
    let uri = format!("/session/{id}/message");
    assert_eq!(call(&app, "POST", &uri, Some(json!({"text": "   "}))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "POST", &uri, Some(json!({"message": "hi"}))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "POST", &uri, None).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn health_tracks_backend_loading() {
    let (app, state) = app(None);
    let (status, body) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["status"], "loading");
    let id = new_session(&app).await;
    let (status, _) = call(&app, "POST", &format!("/session/{id}/message"), Some(json!({"text": "hi"}))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);

    state.set_engine(engine());
    let (status, body) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert!(body["backend_info"].as_str().unwrap().contains("perfect"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn parallel_sessions_stay_separate() {
    let (app, _) = app(Some(engine()));
    const OPENINGS: [&str; 4] = [
        "i want a place to stay .",
        "i am looking for a restaurant .",
        "i need a train .",
        "i would like to find someplace to visit .",
    ];
    let mut tasks = Vec::new();
    for (i, text) in OPENINGS.iter().copied().cycle().take(16).enumerate() {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            let id = new_session(&app).await;
            let (_, turn) = call(&app, "POST", &format!("/session/{id}/message"), Some(json!({"text": text}))).await;
            let (_, session) = call(&app, "GET", &format!("/session/{id}"), None).await;
            (i, turn["domain"].as_str().unwrap().to_string(), session)
        }));
    }
    let want = ["hotel", "restaurant", "train", "attraction"];
    for t in tasks {
        let (i, domain, session) = t.await.unwrap();
        assert_eq!(domain, want[i % 4]);
        let transcript = session["transcript"].as_array().unwrap();
        assert_eq!(transcript.len(), 2);
        assert_eq!(transcript[0]["text"], OPENINGS[i % 4]);
    }
}

#[test]
fn idle_sessions_are_evicted() {
    let store = SessionStore::new(Duration::from_millis(10), 0);
    store.create();
    store.create();
    assert_eq!(store.len(), 2);
    std::thread::sleep(Duration::from_millis(30));
    assert_eq!(store.evict_expired(), 2);
    assert!(store.is_empty());
}
