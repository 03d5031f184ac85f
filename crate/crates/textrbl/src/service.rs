//! HTTP annotation service.
//!
//! Each session wraps one frame directory and walks the states
//! `created -> labeled -> tracked -> reviewed -> finalized`. Session records
//! are written to `<data_dir>/sessions/<id>/session.json` on every change and
//! reloaded when the service starts.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use textrbl_core::pipeline::{
    assign_ids, retrack_from, run_pipeline_with_progress, FirstFrameBoxes, LabeledBox, PipelineConfig, Progress,
};
use textrbl_core::{AnnotationDocument, BoundingBox, FailureParams};

use crate::config::{overlay, TrackerPreset};
use crate::document;
use crate::error::{Error, Result};
use crate::frames::FrameDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Created,
    Labeled,
    Tracked,
    Reviewed,
    Finalized,
}

/// Everything persisted for a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub frames: PathBuf,
    #[serde(default)]
    pub trim: Option<[u32; 2]>,
    pub name: String,
    pub state: SessionState,
    pub revision: u64,
    pub n_frame: u32,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub instances: Vec<LabeledBox>,
    #[serde(default)]
    pub document: Option<AnnotationDocument>,
    #[serde(default)]
    pub last_error: Option<String>,
    #[serde(default)]
    pub finalized_path: Option<PathBuf>,
}

struct Session {
    dir: PathBuf,
    video: FrameDir,
    record: RwLock<SessionRecord>,
    mutation: tokio::sync::Mutex<()>,
    running: AtomicBool,
    progress: Mutex<Option<Progress>>,
}

impl Session {
    fn snapshot(&self) -> SessionRecord {
        self.record.read().expect("session lock").clone()
    }

    fn persist(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&*self.record.read().expect("session lock"))
            .expect("session records serialize");
        document::write_atomic(&self.dir.join("session.json"), text.as_bytes())
    }

    /// Applies `f` to the record, bumps the revision and persists.
    fn commit(&self, f: impl FnOnce(&mut SessionRecord)) -> Result<SessionRecord> {
        {
            let mut rec = self.record.write().expect("session lock");
            f(&mut rec);
            rec.revision += 1;
        }
        self.persist()?;
        Ok(self.snapshot())
    }
}

pub struct AppState {
    data_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl AppState {
    /// Opens `data_dir`, resuming every session found under it.
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Arc<Self>> {
        let data_dir = data_dir.into();
        let root = data_dir.join("sessions");
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&root).map_err(|e| Error::io(&root, e))? {
            let dir = entry.map_err(|e| Error::io(&root, e))?.path();
            match resume(&dir) {
                Ok(session) => {
                    let id = session.snapshot().id;
                    sessions.insert(id, Arc::new(session));
                }
                Err(e) => log::warn!("skipping session in {}: {e}", dir.display()),
            }
        }
        log::info!("resumed {} sessions from {}", sessions.len(), data_dir.display());
        Ok(Arc::new(Self {
            data_dir,
            sessions: RwLock::new(sessions),
        }))
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id:?}"), Value::Null))
    }
}

fn resume(dir: &Path) -> Result<Session> {
    let path = dir.join("session.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let record: SessionRecord = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    let video = FrameDir::open(&record.frames, record.trim)?.with_name(record.name.clone());
    Ok(Session {
        dir: dir.to_path_buf(),
        video,
        record: RwLock::new(record),
        mutation: tokio::sync::Mutex::new(()),
        running: AtomicBool::new(false),
        progress: Mutex::new(None),
    })
}

/// JSON error response `{code, message, detail}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, detail: Value) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
            detail,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "usage", message, Value::Null)
    }

    fn wrong_state(state: SessionState, allowed: &[SessionState]) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "invalid_state",
            format!("not allowed in state {state:?}"),
            json!({ "state": state, "allowed": allowed }),
        )
    }

    fn running() -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "tracking_running",
            "a tracking run is already in progress",
            Value::Null,
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let body = e.body();
        let status = match body.code {
            "not_found" | "unknown_instance" => StatusCode::NOT_FOUND,
            "usage" | "parse" | "config" | "schema_version" => StatusCode::BAD_REQUEST,
            "io" | "image" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, body.code, body.message, body.detail)
    }
}

impl From<textrbl_core::Error> for ApiError {
    fn from(e: textrbl_core::Error) -> Self {
        Error::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "parse", e.to_string(), Value::Null))
}

fn summary(rec: &SessionRecord, running: bool) -> Value {
    json!({
        "id": rec.id,
        "name": rec.name,
        "state": rec.state,
        "revision": rec.revision,
        "n_frame": rec.n_frame,
        "width": rec.width,
        "height": rec.height,
        "trim": rec.trim,
        "instances": rec.instances,
        "running": running,
        "last_error": rec.last_error,
        "finalized_path": rec.finalized_path,
    })
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/frames/{t}", get(get_frame))
        .route("/sessions/{id}/first-boxes", put(put_first_boxes))
        .route("/sessions/{id}/track", post(start_tracking))
        .route("/sessions/{id}/progress", get(get_progress))
        .route("/sessions/{id}/document", get(get_document))
        .route("/sessions/{id}/corrections", post(submit_correction))
        .route("/sessions/{id}/review", post(review))
        .route("/sessions/{id}/finalize", post(finalize))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: &str, data_dir: &Path) -> Result<()> {
    let state = AppState::open(data_dir)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr, e))?;
    log::warn!("listening on http://{addr}");
    axum::serve(listener, router(state)).await.map_err(|e| Error::io(addr, e))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    frames: PathBuf,
    #[serde(default)]
    trim: Option<[u32; 2]>,
    #[serde(default)]
    name: Option<String>,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateRequest = parse_body(&body)?;
    if req.frames.as_os_str().is_empty() {
        return Err(ApiError::bad_request("frames is required"));
    }
    if let Some([a, b]) = req.trim {
        if a == 0 || b < a {
            return Err(ApiError::bad_request(format!("trim {a}:{b} must satisfy 1 <= A <= B")));
        }
    }
    let frames = req.frames.clone();
    let trim = req.trim;
    let video = tokio::task::spawn_blocking(move || FrameDir::open(frames, trim))
        .await
        .expect("frame scan does not panic")
        .map_err(|e| match e {
            Error::Io { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "io", e.to_string(), e.body().detail),
            other => other.into(),
        })?;
    let video = match req.name {
        Some(n) => video.with_name(n),
        None => video,
    };
    use textrbl_core::pipeline::VideoSource;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let (width, height) = video.geometry();
    let record = SessionRecord {
        id: id.clone(),
        frames: std::path::absolute(&req.frames).unwrap_or(req.frames),
        trim: req.trim,
        name: video.name().to_string(),
        state: SessionState::Created,
        revision: 0,
        n_frame: video.frame_count() as u32,
        width: width as u32,
        height: height as u32,
        instances: Vec::new(),
        document: None,
        last_error: None,
        finalized_path: None,
    };
    let session = Arc::new(Session {
        dir: app.data_dir.join("sessions").join(&id),
        video,
        record: RwLock::new(record),
        mutation: tokio::sync::Mutex::new(()),
        running: AtomicBool::new(false),
        progress: Mutex::new(None),
    });
    session.persist()?;
    let body = summary(&session.snapshot(), false);
    app.sessions.write().expect("session table lock").insert(id, session);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let session = app.session(&id)?;
    Ok(Json(summary(&session.snapshot(), session.running.load(Ordering::SeqCst))))
}

async fn get_frame(State(app): State<Arc<AppState>>, UrlPath((id, t)): UrlPath<(String, usize)>) -> ApiResult<Response> {
    let session = app.session(&id)?;
    let path = session.video.path(t).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("frame index {t} outside 0..{}", session.snapshot().n_frame),
            json!({ "frame_index": t }),
        )
    })?;
    let bytes = tokio::fs::read(path).await.map_err(|e| Error::io(path, e))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FirstBoxesRequest {
    boxes: Vec<BoundingBox>,
}

async fn put_first_boxes(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let session = app.session(&id)?;
    let req: FirstBoxesRequest = parse_body(&body)?;
    let _guard = session.mutation.lock().await;
    if session.running.load(Ordering::SeqCst) {
        return Err(ApiError::running());
    }
    let rec = session.snapshot();
    let allowed = [SessionState::Created, SessionState::Labeled];
    if !allowed.contains(&rec.state) {
        return Err(ApiError::wrong_state(rec.state, &allowed));
    }
    let (w, h) = (rec.width as f64, rec.height as f64);
    for (index, b) in req.boxes.iter().enumerate() {
        let inside = b.is_valid() && b.x >= 0.0 && b.y >= 0.0 && b.right() <= w && b.bottom() <= h;
        if !inside {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "geometry",
                format!("box {index} is not a positive-size box inside the {w}x{h} frame"),
                json!({ "index": index, "box": b, "width": rec.width, "height": rec.height }),
            ));
        }
    }
    let labeled = assign_ids(&FirstFrameBoxes::manual(req.boxes)).map_err(|e| {
        let mut api = ApiError::from(e);
        api.status = StatusCode::UNPROCESSABLE_ENTITY;
        api
    })?;
    let rec = session.commit(|r| {
        r.instances = labeled;
        r.state = SessionState::Labeled;
    })?;
    Ok(Json(json!({ "revision": rec.revision, "state": rec.state, "instances": rec.instances })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackRequest {
    #[serde(default)]
    tracker: Option<String>,
    #[serde(default)]
    params: Option<serde_json::Map<String, Value>>,
    #[serde(default)]
    failure_detection: Option<bool>,
    #[serde(default)]
    fd: Option<FailureParams>,
}

async fn start_tracking(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let session = app.session(&id)?;
    let req: TrackRequest = parse_body(&body)?;
    let preset: TrackerPreset = req.tracker.as_deref().unwrap_or("kcf").parse()?;
    let tracker = overlay(preset.params(), req.params.as_ref())?;
    let failure = if req.failure_detection.unwrap_or(true) {
        let fd = req.fd.unwrap_or_default();
        fd.validate()?;
        Some(fd)
    } else {
        None
    };
    let config = PipelineConfig { tracker, failure };

    let _guard = session.mutation.lock().await;
    let rec = session.snapshot();
    let allowed = [SessionState::Labeled, SessionState::Tracked];
    if !allowed.contains(&rec.state) {
        return Err(ApiError::wrong_state(rec.state, &allowed));
    }
    if session
        .running
        .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
        .is_err()
    {
        return Err(ApiError::running());
    }
    *session.progress.lock().expect("progress lock") = None;
    let first = FirstFrameBoxes::manual(rec.instances.iter().map(|l| l.bbox).collect());
    let worker = session.clone();
    tokio::spawn(async move {
        let runner = worker.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            run_pipeline_with_progress(&runner.video, &first, &config, &mut |p| {
                *runner.progress.lock().expect("progress lock") = Some(p.clone());
            })
        })
        .await;
        let _guard = worker.mutation.lock().await;
        let committed = match outcome {
            Ok(Ok(doc)) => worker.commit(|r| {
                r.document = Some(doc);
                r.state = SessionState::Tracked;
                r.last_error = None;
            }),
            Ok(Err(e)) => {
                log::warn!("tracking failed: {e}");
                worker.record.write().expect("session lock").last_error = Some(e.to_string());
                worker.persist().map(|_| worker.snapshot())
            }
            Err(join) => {
                worker.record.write().expect("session lock").last_error = Some(format!("tracking aborted: {join}"));
                worker.persist().map(|_| worker.snapshot())
            }
        };
        if let Err(e) = committed {
            log::error!("could not persist session: {e}");
        }
        worker.running.store(false, Ordering::SeqCst);
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "revision": rec.revision, "state": rec.state, "running": true })),
    ))
}

async fn get_progress(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let session = app.session(&id)?;
    let running = session.running.load(Ordering::SeqCst);
    let rec = session.snapshot();
    let progress = session.progress.lock().expect("progress lock").clone();
    let (frames_done, instances) = match progress {
        Some(p) => (p.frames_done, serde_json::to_value(p.instances).expect("progress serializes")),
        None => (0, json!([])),
    };
    Ok(Json(json!({
        "running": running,
        "state": rec.state,
        "revision": rec.revision,
        "frames_done": frames_done,
        "n_frame": rec.n_frame,
        "instances": instances,
        "error": rec.last_error,
    })))
}

async fn get_document(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let session = app.session(&id)?;
    let rec = session.snapshot();
    let doc = rec.document.ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "no_document",
            "the session has not been tracked yet",
            Value::Null,
        )
    })?;
    Ok(Json(json!({ "revision": rec.revision, "state": rec.state, "document": doc })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrectionRequest {
    instance: String,
    frame: u32,
    #[serde(rename = "box")]
    bbox: Option<BoundingBox>,
    #[serde(default)]
    revision: Option<u64>,
}

fn check_revision(rec: &SessionRecord, expected: Option<u64>) -> ApiResult<()> {
    match expected {
        Some(r) if r != rec.revision => Err(ApiError::new(
            StatusCode::CONFLICT,
            "stale_revision",
            format!("revision {r} is stale, current is {}", rec.revision),
            json!({ "expected": r, "current": rec.revision }),
        )),
        _ => Ok(()),
    }
}

async fn submit_correction(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let session = app.session(&id)?;
    let req: CorrectionRequest = parse_body(&body)?;
    let bbox = req.bbox.ok_or_else(|| ApiError::bad_request("box is required"))?;
    let _guard = session.mutation.lock().await;
    if session.running.load(Ordering::SeqCst) {
        return Err(ApiError::running());
    }
    let rec = session.snapshot();
    let allowed = [SessionState::Tracked, SessionState::Reviewed];
    if !allowed.contains(&rec.state) {
        return Err(ApiError::wrong_state(rec.state, &allowed));
    }
    check_revision(&rec, req.revision)?;
    let doc = rec.document.expect("tracked sessions hold a document");
    let worker = session.clone();
    let instance = req.instance.clone();
    let revised = tokio::task::spawn_blocking(move || retrack_from(&doc, &worker.video, &instance, req.frame, bbox))
        .await
        .expect("retrack does not panic")?;
    let inst = revised.instance(&req.instance).cloned().expect("retrack keeps the instance");
    let rec = session.commit(|r| {
        r.document = Some(revised);
        r.state = SessionState::Tracked;
    })?;
    Ok(Json(json!({
        "revision": rec.revision,
        "state": rec.state,
        "instance": inst.id,
        "entries": inst.entries.len(),
        "last_frame": inst.last_frame(),
        "stopped_at": inst.stopped_at,
    })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RevisionRequest {
    #[serde(default)]
    revision: Option<u64>,
}

async fn review(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let session = app.session(&id)?;
    let req: RevisionRequest = parse_body(&body)?;
    let _guard = session.mutation.lock().await;
    if session.running.load(Ordering::SeqCst) {
        return Err(ApiError::running());
    }
    let rec = session.snapshot();
    let allowed = [SessionState::Tracked, SessionState::Reviewed];
    if !allowed.contains(&rec.state) {
        return Err(ApiError::wrong_state(rec.state, &allowed));
    }
    check_revision(&rec, req.revision)?;
    let rec = session.commit(|r| r.state = SessionState::Reviewed)?;
    Ok(Json(json!({ "revision": rec.revision, "state": rec.state })))
}

async fn finalize(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let session = app.session(&id)?;
    let req: RevisionRequest = parse_body(&body)?;
    let _guard = session.mutation.lock().await;
    let rec = session.snapshot();
    if rec.state == SessionState::Finalized {
        return Ok(Json(json!({ "revision": rec.revision, "state": rec.state, "path": rec.finalized_path })));
    }
    if session.running.load(Ordering::SeqCst) {
        return Err(ApiError::running());
    }
    let allowed = [SessionState::Tracked, SessionState::Reviewed];
    if !allowed.contains(&rec.state) {
        return Err(ApiError::wrong_state(rec.state, &allowed));
    }
    check_revision(&rec, req.revision)?;
    let doc = rec.document.expect("tracked sessions hold a document");
    let path = session.dir.join("annotation.json");
    document::save(&path, &doc)?;
    let rec = session.commit(|r| {
        r.state = SessionState::Finalized;
        r.finalized_path = Some(path.clone());
    })?;
    Ok(Json(json!({ "revision": rec.revision, "state": rec.state, "path": path })))
}
