//! HTTP/JSON API for interactive HED editing.
//!
//! Sessions live in memory and are optionally written to a directory on
//! shutdown (and read back on start). Each session is guarded by its own
//! lock; PATCH requests carry the version they were based on and are
//! rejected with 409 when stale.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::alignment::{parse_alignment_json, to_alignment_json, AlignmentHierarchy};
use crate::audio::decode_wav;
use crate::corpus::parse_alignment_text;
use crate::editor::{apply, EditScript};
use crate::error::{ErrorBody, ErrorReport};
use crate::features::Analyzer;
use crate::hed::{extract_hed, parse_hed_json, serialize_hed, to_json, HedFormat, HedMatrix, ModelBank};
use crate::Error;

pub const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    report: ErrorReport,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        let module = code.split('.').next().unwrap_or("service").to_string();
        Self { status, report: ErrorReport { error: ErrorBody { module, code: code.into(), message: message.into() } } }
    }

    fn from_error(status: StatusCode, e: &Error) -> Self {
        Self { status, report: e.report() }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "service.not_found", format!("no session {id:?}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.report)).into_response()
    }
}

/// One utterance under edit. `current` always equals `initial` with every
/// script in `history` applied in order.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub wav: Vec<u8>,
    pub alignment: AlignmentHierarchy,
    pub initial: HedMatrix,
    pub current: HedMatrix,
    pub version: u64,
    pub history: Vec<EditScript>,
}

fn replay(initial: &HedMatrix, history: &[EditScript]) -> Result<HedMatrix, Error> {
    history.iter().try_fold(initial.clone(), |m, s| apply(&m, s).map_err(Error::from))
}

impl Session {
    fn check(&self) {
        debug_assert_eq!(replay(&self.initial, &self.history).ok().as_ref(), Some(&self.current));
    }

    fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            version: self.version,
            history: self.history.len(),
            hed: serde_json::from_str(&to_json(&self.current)).expect("HED JSON is valid"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub version: u64,
    /// Number of scripts applied since extraction.
    pub history: usize,
    pub hed: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchRequest {
    pub expected_version: u64,
    pub script: EditScript,
}

#[derive(Serialize, Deserialize)]
struct PersistedSession {
    id: String,
    version: u64,
    alignment: String,
    initial: String,
    history: Vec<EditScript>,
}

pub struct AppState {
    bank: Option<Arc<ModelBank>>,
    analyzer: Arc<Analyzer>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    persist_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(bank: Option<ModelBank>, analyzer: Analyzer, persist_dir: Option<PathBuf>) -> Self {
        Self { bank: bank.map(Arc::new), analyzer: Arc::new(analyzer), sessions: RwLock::default(), persist_dir }
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions.read().get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().len()
    }

    /// Writes every session as `<id>.json` plus `<id>.wav`.
    pub fn persist(&self) -> Result<usize, Error> {
        let Some(dir) = &self.persist_dir else { return Ok(0) };
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let sessions: Vec<_> = self.sessions.read().values().cloned().collect();
        for s in &sessions {
            let s = s.lock();
            let doc = PersistedSession {
                id: s.id.clone(),
                version: s.version,
                alignment: to_alignment_json(&s.alignment),
                initial: to_json(&s.initial),
                history: s.history.clone(),
            };
            let json_path = dir.join(format!("{}.json", s.id));
            std::fs::write(&json_path, serde_json::to_string(&doc).expect("session serializes"))
                .map_err(|e| Error::io(&json_path, e))?;
            let wav_path = dir.join(format!("{}.wav", s.id));
            std::fs::write(&wav_path, &s.wav).map_err(|e| Error::io(&wav_path, e))?;
        }
        Ok(sessions.len())
    }

    /// Loads sessions written by [`AppState::persist`].
    pub fn restore(&self) -> Result<usize, Error> {
        let Some(dir) = &self.persist_dir else { return Ok(0) };
        if !dir.exists() {
            return Ok(0);
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut n = 0;
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let doc: PersistedSession = serde_json::from_str(&text).map_err(|e| Error::io(&p, e))?;
            let wav_path = dir.join(format!("{}.wav", doc.id));
            let wav = std::fs::read(&wav_path).map_err(|e| Error::io(&wav_path, e))?;
            let initial = parse_hed_json(&doc.initial)?;
            let current = replay(&initial, &doc.history)?;
            let session = Session {
                id: doc.id.clone(),
                wav,
                alignment: parse_alignment_json(&doc.alignment)?,
                initial,
                current,
                version: doc.version,
                history: doc.history,
            };
            self.sessions.write().insert(doc.id, Arc::new(Mutex::new(session)));
            n += 1;
        }
        Ok(n)
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "models_loaded": state.bank.is_some(),
        "emotions": state.bank.as_ref().map(|b| b.emotions().to_vec()).unwrap_or_default(),
        "sessions": state.session_count(),
    }))
}

async fn create(State(state): State<Arc<AppState>>, mut multipart: Multipart) -> Result<Response, ApiError> {
    let Some(bank) = state.bank.clone() else {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "service.no_models", "no model bank is loaded"));
    };
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "service.bad_request", m);
    let mut wav = None;
    let mut alignment = None;
    while let Some(field) = multipart.next_field().await.map_err(|e| bad(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let data = field.bytes().await.map_err(|e| bad(e.to_string()))?;
        match name.as_str() {
            "wav" | "audio" => wav = Some(data.to_vec()),
            "alignment" => alignment = Some(data),
            _ => {}
        }
    }
    let wav = wav.ok_or_else(|| bad("missing multipart field `wav`".into()))?;
    let alignment = alignment.ok_or_else(|| bad("missing multipart field `alignment`".into()))?;
    let alignment = std::str::from_utf8(&alignment).map_err(|_| bad("alignment is not UTF-8".into()))?.to_string();

    let analyzer = state.analyzer.clone();
    let session = tokio::task::spawn_blocking(move || -> Result<Session, Error> {
        let w = decode_wav(&wav)?;
        let h = parse_alignment_text(&alignment)?;
        let hed = extract_hed(&w, &h, &bank, &analyzer)?;
        Ok(Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            wav,
            alignment: h,
            initial: hed.clone(),
            current: hed,
            version: 0,
            history: Vec::new(),
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "service.internal", e.to_string()))?
    .map_err(|e| ApiError::from_error(StatusCode::BAD_REQUEST, &e))?;
    let view = session.view();
    state.sessions.write().insert(session.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn list(State(state): State<Arc<AppState>>) -> Json<Vec<serde_json::Value>> {
    let mut out: Vec<_> = state
        .sessions
        .read()
        .values()
        .map(|s| {
            let s = s.lock();
            serde_json::json!({"id": s.id, "version": s.version, "phonemes": s.current.row_count()})
        })
        .collect();
    out.sort_by(|a, b| a["id"].as_str().cmp(&b["id"].as_str()));
    Json(out)
}

async fn get_hed(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    let s = state.session(&id)?;
    let view = s.lock().view();
    Ok(Json(view))
}

async fn patch_hed(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let s = state.session(&id)?;
    let de = &mut serde_json::Deserializer::from_slice(&body);
    let req: PatchRequest = serde_path_to_error::deserialize(de).map_err(|e| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "editor.script", format!("{}: {}", e.path(), e.inner()))
    })?;
    let mut s = s.lock();
    if req.expected_version != s.version {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "service.version_conflict",
            format!("expected version {}, session is at {}", req.expected_version, s.version),
        ));
    }
    let next = apply(&s.current, &req.script)
        .map_err(|e| ApiError::from_error(StatusCode::UNPROCESSABLE_ENTITY, &Error::from(e)))?;
    s.current = next;
    s.history.push(req.script);
    s.version += 1;
    s.check();
    Ok(Json(s.view()))
}

async fn undo(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    let s = state.session(&id)?;
    let mut s = s.lock();
    if s.history.pop().is_none() {
        return Err(ApiError::new(StatusCode::CONFLICT, "service.nothing_to_undo", "edit history is empty"));
    }
    s.current = replay(&s.initial, &s.history)
        .map_err(|e| ApiError::from_error(StatusCode::INTERNAL_SERVER_ERROR, &e))?;
    s.version += 1;
    s.check();
    Ok(Json(s.view()))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let format: HedFormat = q
        .format
        .as_deref()
        .unwrap_or("csv")
        .parse()
        .map_err(|m: String| ApiError::new(StatusCode::BAD_REQUEST, "service.bad_request", m))?;
    let body = serialize_hed(&s.lock().current, format);
    let (ctype, ext) = match format {
        HedFormat::Csv => ("text/csv; charset=utf-8", "csv"),
        HedFormat::Json => ("application/json", "json"),
    };
    let disposition = format!("attachment; filename=\"{id}.hed.{ext}\"");
    Ok(([(header::CONTENT_TYPE, ctype.to_string()), (header::CONTENT_DISPOSITION, disposition)], body).into_response())
}

async fn audio(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let bytes = s.lock().wav.clone();
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

async fn alignment(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let text = to_alignment_json(&s.lock().alignment);
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

fn cors(origin: Option<&str>) -> CorsLayer {
    let allow = match origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => AllowOrigin::any(),
        },
        None => AllowOrigin::any(),
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::PATCH, Method::OPTIONS])
        .allow_headers(Any)
}

/// The API router. `cors_origin` restricts CORS to one origin; any origin
/// is allowed when `None`.
pub fn router(state: Arc<AppState>, cors_origin: Option<&str>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/utterances", post(create).get(list))
        .route("/utterances/{id}/hed", get(get_hed).patch(patch_hed))
        .route("/utterances/{id}/undo", post(undo))
        .route("/utterances/{id}/export", get(export))
        .route("/utterances/{id}/audio", get(audio))
        .route("/utterances/{id}/alignment", get(alignment))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .layer(cors(cors_origin))
        .with_state(state)
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub persist_dir: Option<PathBuf>,
    pub cors_origin: Option<String>,
}

/// Serves until Ctrl-C, then persists sessions if a directory was given.
pub async fn serve(config: ServeConfig, bank: Option<ModelBank>, analyzer: Analyzer) -> Result<(), Error> {
    let state = Arc::new(AppState::new(bank, analyzer, config.persist_dir.clone()));
    let restored = state.restore()?;
    if restored > 0 {
        log::info!("restored {restored} sessions");
    }
    let listener =
        tokio::net::TcpListener::bind(config.addr).await.map_err(|e| Error::io(Path::new(&config.addr.to_string()), e))?;
    log::info!("listening on {}", config.addr);
    axum::serve(listener, router(state.clone(), config.cors_origin.as_deref()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(Path::new(&config.addr.to_string()), e))?;
    let saved = state.persist()?;
    log::info!("persisted {saved} sessions");
    Ok(())
}
