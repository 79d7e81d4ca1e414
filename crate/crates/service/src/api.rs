use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use wai_core::geometry::Point;
use wai_core::response::{mark_duplicate_pixels, TrialResponse};
use wai_core::stimgen::{plan_session, StimulusPool};

use crate::session::{Ack, Session, SessionError, TrialDescriptor};
use crate::store::{LogEntry, Storage, StoreError};

/// Shared server state. Each session has its own lock; the response log
/// lock orders appends across sessions.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    pool: StimulusPool,
    store: Box<dyn Storage>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    responses: Mutex<Vec<TrialResponse>>,
}

impl AppState {
    /// Replay `store` and serve sessions drawn from `pool`.
    pub fn new(pool: StimulusPool, store: impl Storage + 'static) -> Result<Self, SessionError> {
        let mut sessions: HashMap<String, Session> = HashMap::new();
        let mut responses = Vec::new();
        for entry in store.load()? {
            match entry {
                LogEntry::Session(record) => {
                    sessions.insert(record.id.clone(), Session::from_record(record));
                }
                LogEntry::Response(r) => {
                    let s = sessions
                        .get_mut(&r.session_id)
                        .ok_or_else(|| SessionError::UnknownSession(r.session_id.clone()))?;
                    if r.trial_index != s.cursor {
                        return Err(SessionError::OutOfOrder { expected: s.cursor, got: r.trial_index });
                    }
                    s.begin();
                    s.apply(&r);
                    responses.push(r);
                }
            }
        }
        let sessions = sessions.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect();
        Ok(Self {
            inner: Arc::new(Inner {
                pool,
                store: Box::new(store),
                sessions: Mutex::new(sessions),
                responses: Mutex::new(responses),
            }),
        })
    }

    pub fn pool(&self) -> &StimulusPool {
        &self.inner.pool
    }

    pub fn session_count(&self) -> usize {
        lock(&self.inner.sessions).len()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        lock(&self.inner.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self, seed: Option<u64>) -> Result<Session, SessionError> {
        let seed = seed.unwrap_or_else(rand::random);
        let plan = plan_session(&self.inner.pool, seed)?;
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        let session = Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            plan,
            cursor: 0,
            phase: crate::session::Phase::Tutorial,
            engagement_failures: 0,
            created_at,
        };
        self.inner.store.append(&LogEntry::Session(session.record()))?;
        lock(&self.inner.sessions).insert(session.id.clone(), Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    pub fn next_trial(&self, id: &str) -> Result<TrialDescriptor, SessionError> {
        let session = self.session(id)?;
        let mut s = lock(&session);
        s.next_trial(&self.inner.pool)
    }

    pub fn submit(&self, id: &str, trial_index: usize, click: Point, rt_ms: f64) -> Result<Ack, SessionError> {
        let session = self.session(id)?;
        let mut s = lock(&session);
        let record = s.prepare_response(&self.inner.pool, trial_index, click, rt_ms)?;
        {
            let mut log = lock(&self.inner.responses);
            self.inner.store.append(&LogEntry::Response(record.clone()))?;
            log.push(record.clone());
        }
        s.begin();
        s.apply(&record);
        Ok(s.ack(&record, &self.inner.pool))
    }

    /// All responses in log order with exclusion flags filled in.
    pub fn export(&self, excluded: Option<bool>) -> Vec<TrialResponse> {
        let mut records = lock(&self.inner.responses).clone();
        mark_duplicate_pixels(&mut records);
        let excluded_ids: std::collections::HashSet<String> = lock(&self.inner.sessions)
            .iter()
            .filter(|(_, s)| lock(s).excluded())
            .map(|(id, _)| id.clone())
            .collect();
        for r in &mut records {
            r.excluded = excluded_ids.contains(&r.session_id);
        }
        match excluded {
            Some(flag) => records.into_iter().filter(|r| r.excluded == flag).collect(),
            None => records,
        }
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            SessionError::Done => (StatusCode::CONFLICT, "session_done"),
            SessionError::OutOfOrder { .. } => (StatusCode::CONFLICT, "out_of_order"),
            SessionError::OutOfBounds { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "out_of_bounds"),
            SessionError::InvalidRt(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_rt"),
            SessionError::UnknownStimulus(_) | SessionError::Plan(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "pool_error")
            }
            SessionError::Storage(StoreError::Unavailable(_)) => (StatusCode::SERVICE_UNAVAILABLE, "storage_failure"),
            SessionError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_failure"),
        };
        (status, Json(ErrorBody { error: code, message: self.to_string() })).into_response()
    }
}

#[derive(Debug, Default, Deserialize)]
struct CreateBody {
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Created {
    id: String,
}

#[derive(Debug, Deserialize)]
struct ResponseBody {
    trial_index: usize,
    x: f64,
    y: f64,
    rt_ms: f64,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    excluded: Option<bool>,
}

async fn create(State(state): State<AppState>, body: Option<Json<CreateBody>>) -> Result<Json<Created>, SessionError> {
    let seed = body.and_then(|Json(b)| b.seed);
    let session = state.create_session(seed)?;
    Ok(Json(Created { id: session.id }))
}

async fn next(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<TrialDescriptor>, SessionError> {
    state.next_trial(&id).map(Json)
}

async fn respond(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<ResponseBody>,
) -> Result<Json<Ack>, SessionError> {
    state.submit(&id, body.trial_index, Point::new(body.x, body.y), body.rt_ms).map(Json)
}

async fn export(State(state): State<AppState>, Query(q): Query<ExportQuery>) -> Response {
    let mut body = String::new();
    for r in state.export(q.excluded) {
        body.push_str(&serde_json::to_string(&r).expect("records serialize"));
        body.push('\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", post(create))
        .route("/session/{id}/next", get(next))
        .route("/session/{id}/response", post(respond))
        .route("/export", get(export))
        .with_state(state)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
