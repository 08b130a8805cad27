//! HTTP API over sessions, parsing, similarity and evaluation.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use crate::chat::{generate_turn, understand_turn, Backend, ChatError, ChatSession, SessionLog};
use crate::fingerprint::FingerprintConfig;
use crate::metrics::{
    evaluate_generation, evaluate_understanding, read_records, EvalError, Record, Task,
};
use crate::smiles::parse;

struct Slot {
    session: ChatSession,
    log: Option<SessionLog>,
}

pub struct AppState {
    backends: HashMap<String, Arc<dyn Backend>>,
    default_backend: String,
    sessions: std::sync::Mutex<HashMap<String, Arc<Mutex<Slot>>>>,
    next_id: AtomicU64,
    fp: FingerprintConfig,
    k: usize,
    log_dir: Option<PathBuf>,
}

impl AppState {
    /// The first backend is the default for new sessions.
    pub fn new(
        backends: Vec<Arc<dyn Backend>>,
        fp: FingerprintConfig,
        k: usize,
        log_dir: Option<PathBuf>,
    ) -> Arc<AppState> {
        let default_backend = backends
            .first()
            .map(|b| b.id().to_string())
            .unwrap_or_default();
        Arc::new(AppState {
            backends: backends
                .into_iter()
                .map(|b| (b.id().to_string(), b))
                .collect(),
            default_backend,
            sessions: std::sync::Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            fp,
            k,
            log_dir,
        })
    }

    fn slot(&self, id: &str) -> Option<Arc<Mutex<Slot>>> {
        self.sessions.lock().expect("session map").get(id).cloned()
    }

    /// Write every session's pending events to its log.
    pub async fn flush_logs(&self) {
        let slots: Vec<_> = self
            .sessions
            .lock()
            .expect("session map")
            .values()
            .cloned()
            .collect();
        for slot in slots {
            let mut s = slot.lock().await;
            let Slot { session, log } = &mut *s;
            if let Some(log) = log {
                if let Err(e) = log.sync(session) {
                    eprintln!("session {}: {e}", session.id());
                }
            }
        }
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<ChatError> for ApiError {
    fn from(e: ChatError) -> Self {
        let status = match &e {
            ChatError::Backend(_) => StatusCode::BAD_GATEWAY,
            ChatError::Io(_) | ChatError::Log { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Deserialize, Default)]
struct NewSession {
    backend: Option<String>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Option<Json<NewSession>>,
) -> ApiResult<Json<serde_json::Value>> {
    let backend = body
        .and_then(|Json(b)| b.backend)
        .unwrap_or_else(|| state.default_backend.clone());
    if !state.backends.contains_key(&backend) {
        return Err(ApiError(
            StatusCode::NOT_FOUND,
            format!("unknown backend {backend:?}"),
        ));
    }
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::SeqCst));
    let session = ChatSession::start(id.clone(), backend);
    let log = match &state.log_dir {
        Some(dir) => Some(
            SessionLog::create(&dir.join(format!("{id}.jsonl")), &session)
                .map_err(ApiError::from)?,
        ),
        None => None,
    };
    state
        .sessions
        .lock()
        .expect("session map")
        .insert(id.clone(), Arc::new(Mutex::new(Slot { session, log })));
    Ok(Json(json!({ "id": id })))
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum TurnKind {
    Text,
    Molecule,
}

#[derive(Deserialize)]
struct TurnRequest {
    kind: TurnKind,
    content: String,
    k: Option<usize>,
    /// Candidate of the previous turn to refine from.
    choose: Option<usize>,
}

async fn post_turn(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<TurnRequest>,
) -> ApiResult<Response> {
    let slot = state
        .slot(&id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))?;
    let mut guard = slot.try_lock_owned().map_err(|_| {
        ApiError(
            StatusCode::CONFLICT,
            format!("session {id} has a turn in progress"),
        )
    })?;
    let backend = state
        .backends
        .get(guard.session.backend())
        .cloned()
        .ok_or_else(|| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "backend gone".into()))?;
    let fp = state.fp;
    let k = req.k.unwrap_or(state.k);
    tokio::task::spawn_blocking(move || -> ApiResult<Response> {
        let Slot { session, log } = &mut *guard;
        let body = match req.kind {
            TurnKind::Text => {
                let set =
                    generate_turn(session, backend.as_ref(), &req.content, k, req.choose, &fp)?;
                Json(set).into_response()
            }
            TurnKind::Molecule => {
                let description = understand_turn(session, backend.as_ref(), &req.content)?;
                Json(json!({ "description": description })).into_response()
            }
        };
        if let Some(log) = log {
            log.sync(session)?;
        }
        Ok(body)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let slot = state
        .slot(&id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))?;
    let body = slot.lock().await.session.to_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn list_backends(State(state): State<Arc<AppState>>) -> Json<Vec<String>> {
    let mut ids: Vec<String> = state.backends.keys().cloned().collect();
    ids.sort();
    Json(ids)
}

#[derive(Serialize)]
pub struct AtomJson {
    pub element: String,
    pub aromatic: bool,
    pub charge: i8,
    pub ring: bool,
    pub ring_sizes: Vec<usize>,
}

#[derive(Serialize)]
pub struct BondJson {
    pub a: usize,
    pub b: usize,
    pub order: String,
}

#[derive(Serialize)]
pub struct GraphJson {
    pub canonical: String,
    pub atoms: Vec<AtomJson>,
    pub bonds: Vec<BondJson>,
}

#[derive(Deserialize)]
struct ParseQuery {
    smiles: String,
}

fn bad_smiles(smiles: &str, e: crate::smiles::ParseError) -> ApiError {
    ApiError(
        StatusCode::BAD_REQUEST,
        format!("invalid SMILES {smiles:?}: {e}"),
    )
}

async fn parse_molecule(Query(q): Query<ParseQuery>) -> ApiResult<Json<GraphJson>> {
    let g = parse(&q.smiles).map_err(|e| bad_smiles(&q.smiles, e))?;
    Ok(Json(GraphJson {
        canonical: crate::smiles::canonical(&g),
        atoms: g
            .atoms()
            .iter()
            .enumerate()
            .map(|(i, a)| AtomJson {
                element: a.element.symbol().to_string(),
                aromatic: a.aromatic,
                charge: a.formal_charge,
                ring: g.in_ring(i),
                ring_sizes: g.ring_sizes_of(i),
            })
            .collect(),
        bonds: g
            .bonds()
            .iter()
            .map(|b| BondJson {
                a: b.a,
                b: b.b,
                order: b.order.name().to_string(),
            })
            .collect(),
    }))
}

#[derive(Deserialize)]
struct SimilarityRequest {
    a: String,
    b: String,
}

async fn similarity(
    State(state): State<Arc<AppState>>,
    Json(req): Json<SimilarityRequest>,
) -> ApiResult<Json<crate::fingerprint::Similarity>> {
    let a = parse(&req.a).map_err(|e| bad_smiles(&req.a, e))?;
    let b = parse(&req.b).map_err(|e| bad_smiles(&req.b, e))?;
    Ok(Json(state.fp.similarity(&a, &b)))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RecordSource {
    Path(PathBuf),
    Inline(Vec<Record>),
}

impl RecordSource {
    fn load(self) -> Result<Vec<Record>, EvalError> {
        match self {
            RecordSource::Path(p) => read_records(&p),
            RecordSource::Inline(r) => Ok(r),
        }
    }
}

#[derive(Deserialize)]
struct EvaluateRequest {
    task: Task,
    predictions: RecordSource,
    references: RecordSource,
}

async fn evaluate(
    State(state): State<Arc<AppState>>,
    Json(req): Json<EvaluateRequest>,
) -> ApiResult<Json<crate::metrics::EvalReport>> {
    let fp = state.fp;
    tokio::task::spawn_blocking(move || -> ApiResult<_> {
        let preds = req.predictions.load()?;
        let refs = req.references.load()?;
        let report = match req.task {
            Task::Generation => evaluate_generation(&preds, &refs, &fp)?,
            Task::Understanding => evaluate_understanding(&preds, &refs)?,
        };
        Ok(Json(report))
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/backends", get(list_backends))
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(get_session))
        .route("/sessions/:id/turns", post(post_turn))
        .route("/molecules/parse", get(parse_molecule))
        .route("/similarity", post(similarity))
        .route("/evaluate", post(evaluate))
        .with_state(state)
}

/// Serve until `shutdown` resolves, then flush every session log.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    state.flush_logs().await;
    Ok(())
}
