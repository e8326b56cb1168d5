//! JSON session API over [`Engine`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tod_core::belief::serialize_belief;
use tod_core::engine::{Engine, Session, SystemTurn, ToleranceEvent};
use tod_core::polish::polish;
use tod_core::seqmodel::Role;

/// Debug payload returned for every system turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnPayload {
    pub response: String,
    pub raw_response: String,
    pub belief: String,
    pub domain: String,
    pub db_match: usize,
    pub db_bucket: String,
    pub template: String,
    pub tolerance_events: Vec<ToleranceEvent>,
}

impl TurnPayload {
    pub fn new(turn: &SystemTurn, polished: String) -> Self {
        TurnPayload {
            response: polished,
            raw_response: turn.raw_response.clone(),
            belief: serialize_belief(&turn.belief),
            domain: turn.domain.to_string(),
            db_match: turn.db.count,
            db_bucket: turn.db.bucket().to_string(),
            template: turn.template.as_str().to_string(),
            tolerance_events: turn.tolerance_events.clone(),
        }
    }
}

struct Entry {
    session: Session,
    payloads: Vec<TurnPayload>,
    last_used: Instant,
}

/// Live sessions with idle expiry. Each session has its own lock, so
/// messages to one session are serialized while different sessions proceed
/// concurrently.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Entry>>>>,
    ttl: Duration,
    seed: u64,
}

impl SessionStore {
    pub fn new(ttl: Duration, seed: u64) -> Self {
        SessionStore {
            sessions: Mutex::new(HashMap::new()),
            ttl,
            seed,
        }
    }

    pub fn create(&self) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let entry = Entry {
            session: Session::new(id.clone(), self.seed),
            payloads: Vec::new(),
            last_used: Instant::now(),
        };
        self.sessions
            .lock()
            .unwrap()
            .insert(id.clone(), Arc::new(tokio::sync::Mutex::new(entry)));
        id
    }

    fn get(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<Entry>>> {
        self.sessions.lock().unwrap().get(id).cloned()
    }

    pub fn remove(&self, id: &str) -> bool {
        self.sessions.lock().unwrap().remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle for longer than the TTL. Sessions busy with a
    /// request are kept.
    pub fn evict_expired(&self) -> usize {
        let now = Instant::now();
        let mut sessions = self.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, entry| match entry.try_lock() {
            Ok(e) => now.duration_since(e.last_used) <= self.ttl,
            Err(_) => true,
        });
        before - sessions.len()
    }
}

#[derive(Clone)]
pub struct AppState {
    engine: Arc<RwLock<Option<Engine>>>,
    store: Arc<SessionStore>,
}

impl AppState {
    pub fn new(engine: Option<Engine>, store: SessionStore) -> Self {
        AppState {
            engine: Arc::new(RwLock::new(engine)),
            store: Arc::new(store),
        }
    }

    /// Installs the engine once the backend has loaded.
    pub fn set_engine(&self, engine: Engine) {
        *self.engine.write().unwrap() = Some(engine);
    }

    pub fn store(&self) -> &Arc<SessionStore> {
        &self.store
    }

    fn engine(&self) -> Option<Engine> {
        self.engine.read().unwrap().clone()
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn health(State(state): State<AppState>) -> Response {
    match state.engine() {
        Some(engine) => Json(json!({
            "status": "ok",
            "backend_info": engine.backend().describe(),
        }))
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "loading", "backend_info": null })),
        )
            .into_response(),
    }
}

async fn create_session(State(state): State<AppState>) -> Response {
    state.store.evict_expired();
    let id = state.store.create();
    (StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response()
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
}

async fn post_message(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    let Some(entry) = state.store.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown session `{id}`"));
    };
    let text = match serde_json::from_slice::<MessageBody>(&body) {
        Ok(m) if !m.text.trim().is_empty() => m.text,
        Ok(_) => return error(StatusCode::BAD_REQUEST, "message text is empty"),
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("expected {{\"text\": ...}}: {e}")),
    };
    let Some(engine) = state.engine() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "backend not loaded");
    };
    let mut entry = entry.lock().await;
    let mut session = entry.session.clone();
    let result = tokio::task::spawn_blocking(move || {
        let turn = engine.respond(&mut session, &text)?;
        let polished = polish(&turn, engine.db());
        Ok::<_, tod_core::engine::EngineError>((session, TurnPayload::new(&turn, polished)))
    })
    .await;
    entry.last_used = Instant::now();
    match result {
        Ok(Ok((session, payload))) => {
            entry.session = session;
            entry.payloads.push(payload.clone());
            Json(payload).into_response()
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub role: Role,
    pub text: String,
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(entry) = state.store.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown session `{id}`"));
    };
    let entry = entry.lock().await;
    let transcript: Vec<TranscriptLine> = entry
        .session
        .history
        .iter()
        .map(|(role, text)| TranscriptLine {
            role: *role,
            text: text.clone(),
        })
        .collect();
    Json(json!({
        "session_id": id,
        "transcript": transcript,
        "turns": entry.payloads,
    }))
    .into_response()
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    if state.store.remove(&id) {
        StatusCode::NO_CONTENT.into_response()
    } else {
        error(StatusCode::NOT_FOUND, format!("unknown session `{id}`"))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/session", post(create_session))
        .route("/session/{id}", get(get_session).delete(delete_session))
        .route("/session/{id}/message", post(post_message))
        .with_state(state)
}
