//! HTTP service for the trial runner.
//!
//! Every GET reads immutable artifacts. Accepted responses go through one
//! writer thread that owns the per-session JSON-lines logs, so appends are
//! serialized and duplicate detection is race free.

use crate::commands::{rendered_clip_dir, spv_path, RenderRecord, RENDER_FILE, SESSION_FILE};
use crate::artifacts::read_json;
use crate::config::RunConfig;
use crate::error::CliError;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ndarray::{Array2, Array3};
use phosphor_core::dataset::{frame_path, load_catalog, LoadOptions, StimulusCatalog};
use phosphor_core::netpbm::{read_pgm, read_ppm};
use phosphor_core::psych::{ResponseEnvelope, SessionPlan, TrialSpec, SCHEMA_VERSION};
use serde::Deserialize;
use serde_json::{json, Value};
use std::collections::{HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use tokio::sync::{mpsc, oneshot};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into() }
    }

    fn not_found(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, kind, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "schema_version": SCHEMA_VERSION, "error": self.kind, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Appended {
    Accepted,
    Duplicate,
}

struct AppendRequest {
    envelope: ResponseEnvelope,
    reply: oneshot::Sender<Result<Appended, String>>,
}

/// Owner of the response logs; runs on its own thread.
struct LogWriter {
    dir: PathBuf,
    accepted: HashSet<(String, usize, bool)>,
}

impl LogWriter {
    fn append(&mut self, env: &ResponseEnvelope) -> Result<Appended, String> {
        let key = (env.session_id.clone(), env.trial_index, env.practice);
        if self.accepted.contains(&key) {
            return Ok(Appended::Duplicate);
        }
        let mut line = serde_json::to_string(env).map_err(|e| e.to_string())?;
        line.push('\n');
        let path = log_path(&self.dir, &env.session_id);
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| e.to_string())?;
        file.write_all(line.as_bytes()).and_then(|_| file.sync_data()).map_err(|e| format!("{}: {e}", path.display()))?;
        self.accepted.insert(key);
        Ok(Appended::Accepted)
    }
}

pub fn log_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.jsonl"))
}

/// Reads an existing log and cuts off an interrupted final line so later
/// appends start on a clean line. Corruption before the last line is an error.
pub fn recover_log(path: &Path) -> Result<(Vec<ResponseEnvelope>, Option<String>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input("InputUnreadable", format!("{}: {e}", path.display())))?;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut envelopes = Vec::new();
    let mut good_len = 0;
    for (i, line) in lines.iter().enumerate() {
        let content = line.trim();
        let parsed = if content.is_empty() { None } else { Some(serde_json::from_str::<ResponseEnvelope>(content)) };
        match parsed {
            None if line.ends_with('\n') => good_len += line.len(),
            None => {}
            Some(Ok(env)) if line.ends_with('\n') => {
                envelopes.push(env);
                good_len += line.len();
            }
            Some(_) if Some(i) == last => {
                OpenOptions::new()
                    .write(true)
                    .open(path)
                    .and_then(|f| f.set_len(good_len as u64))
                    .map_err(|e| CliError::write(path, e))?;
                let warning = format!("{}: removed interrupted final line {}", path.display(), i + 1);
                return Ok((envelopes, Some(warning)));
            }
            Some(Ok(_)) => unreachable!("only the final line can lack a newline"),
            Some(Err(e)) => {
                return Err(CliError::input("CorruptLog", format!("{}: line {} is corrupt: {e}", path.display(), i + 1)))
            }
        }
    }
    Ok((envelopes, None))
}

pub struct AppState {
    sessions: HashMap<String, SessionPlan>,
    catalog: Option<StimulusCatalog>,
    rendered: PathBuf,
    writer: mpsc::Sender<AppendRequest>,
    pub warnings: Vec<String>,
}

impl AppState {
    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    fn trial(&self, id: &str, trial: &str, practice: bool) -> Result<(&SessionPlan, &TrialSpec, usize), ApiError> {
        let plan = self.sessions.get(id).ok_or_else(|| ApiError::not_found("UnknownSession", format!("no session {id:?}")))?;
        let index: usize =
            trial.parse().map_err(|_| ApiError::not_found("UnknownTrial", format!("{trial:?} is not a trial index")))?;
        let spec = plan
            .trial(index, practice)
            .ok_or_else(|| ApiError::not_found("UnknownTrial", format!("session {id:?} has no trial {index}")))?;
        Ok((plan, spec, index))
    }

    /// Rendered sequence of a trial. Messages never name the clip.
    fn stimulus(&self, plan: &SessionPlan, spec: &TrialSpec, index: usize) -> Result<(PathBuf, RenderRecord), ApiError> {
        let dir = rendered_clip_dir(&self.rendered, &spec.clip_id, spec.strategy, spec.grid, &plan.param_cell);
        let record: RenderRecord = read_json(&dir.join(RENDER_FILE))
            .map_err(|_| ApiError::not_found("StimulusNotRendered", format!("the stimulus of trial {index} has not been rendered")))?;
        Ok((dir, record))
    }
}

/// Loads sessions, the optional catalog and existing logs, and starts the log writer.
pub fn load_state(cfg: &RunConfig) -> Result<Arc<AppState>, CliError> {
    let sessions_dir = cfg.sessions_dir();
    let mut sessions = HashMap::new();
    let entries = fs::read_dir(&sessions_dir)
        .map_err(|e| CliError::input("MissingInput", format!("{}: {e} (run make-session first)", sessions_dir.display())))?;
    for entry in entries.filter_map(Result::ok) {
        let file = entry.path().join(SESSION_FILE);
        if file.is_file() {
            let plan: SessionPlan = read_json(&file)?;
            sessions.insert(plan.subject_id.clone(), plan);
        }
    }
    if sessions.is_empty() {
        return Err(CliError::input("MissingInput", format!("no sessions under {}", sessions_dir.display())));
    }
    let catalog = match &cfg.catalog {
        Some(p) => Some(load_catalog(p, LoadOptions { paper_design: false, check_frames: false })?),
        None => None,
    };

    let responses = cfg.responses_dir();
    fs::create_dir_all(&responses).map_err(|e| CliError::write(&responses, e))?;
    let mut accepted = HashSet::new();
    let mut warnings = Vec::new();
    for id in sessions.keys() {
        let path = log_path(&responses, id);
        if !path.is_file() {
            continue;
        }
        let (envelopes, warning) = recover_log(&path)?;
        warnings.extend(warning);
        accepted.extend(envelopes.into_iter().map(|e| (e.session_id, e.trial_index, e.practice)));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let (tx, mut rx) = mpsc::channel::<AppendRequest>(256);
    let mut writer = LogWriter { dir: responses, accepted };
    std::thread::Builder::new()
        .name("response-log".into())
        .spawn(move || {
            while let Some(req) = rx.blocking_recv() {
                let _ = req.reply.send(writer.append(&req.envelope));
            }
        })
        .map_err(|e| CliError::internal("Spawn", e.to_string()))?;

    Ok(Arc::new(AppState { sessions, catalog, rendered: cfg.rendered_dir(), writer: tx, warnings }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/session/{id}", get(session))
        .route("/api/stimulus/{id}/{trial}", get(stimulus))
        .route("/api/stimulus/{id}/{trial}/frame/{k}", get(frame))
        .route("/api/stimulus/{id}/{trial}/original/{k}", get(original))
        .route("/api/response", post(response))
        .with_state(state)
}

#[derive(Debug, Default, Deserialize)]
struct PracticeQuery {
    #[serde(default)]
    practice: bool,
}

async fn health(State(s): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "schema_version": SCHEMA_VERSION, "status": "ok", "sessions": s.session_count() }))
}

async fn session(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    let plan = s.sessions.get(&id).ok_or_else(|| ApiError::not_found("UnknownSession", format!("no session {id:?}")))?;
    Ok(Json(serde_json::to_value(plan.blinded()).map_err(|e| ApiError::internal(e.to_string()))?))
}

async fn stimulus(
    State(s): State<Arc<AppState>>,
    UrlPath((id, trial)): UrlPath<(String, String)>,
    Query(q): Query<PracticeQuery>,
) -> Result<Json<Value>, ApiError> {
    let (plan, spec, index) = s.trial(&id, &trial, q.practice)?;
    let (_, record) = s.stimulus(plan, spec, index)?;
    let suffix = if q.practice { "?practice=true" } else { "" };
    let urls = |kind: &str| -> Vec<String> {
        (0..record.frame_count).map(|k| format!("/api/stimulus/{id}/{index}/{kind}/{k}{suffix}")).collect()
    };
    let mut manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "session_id": id,
        "trial_index": index,
        "practice": q.practice,
        "fps": record.fps,
        "n_frames": record.frame_count,
        "width": record.percept.width,
        "height": record.percept.height,
        "frame_urls": urls("frame"),
    });
    if q.practice && s.catalog.is_some() {
        manifest["original_frame_urls"] = json!(urls("original"));
    }
    Ok(Json(manifest))
}

fn png(pixels: Vec<u8>, width: usize, height: usize, channels: usize) -> Result<Response, ApiError> {
    let color = if channels == 3 { image::ExtendedColorType::Rgb8 } else { image::ExtendedColorType::L8 };
    let mut out = Vec::new();
    image::ImageEncoder::write_image(
        image::codecs::png::PngEncoder::new(&mut out),
        &pixels,
        width as u32,
        height as u32,
        color,
    )
    .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], out).into_response())
}

fn gray_png(img: Array2<u8>) -> Result<Response, ApiError> {
    let (h, w) = img.dim();
    png(img.iter().copied().collect(), w, h, 1)
}

fn rgb_png(img: Array3<u8>) -> Result<Response, ApiError> {
    let (h, w, _) = img.dim();
    png(img.iter().copied().collect(), w, h, 3)
}

fn frame_index(k: &str, n: usize) -> Result<usize, ApiError> {
    k.parse::<usize>()
        .ok()
        .filter(|&k| k < n)
        .ok_or_else(|| ApiError::not_found("UnknownFrame", format!("frame {k:?} is not in 0..{n}")))
}

async fn frame(
    State(s): State<Arc<AppState>>,
    UrlPath((id, trial, k)): UrlPath<(String, String, String)>,
    Query(q): Query<PracticeQuery>,
) -> Result<Response, ApiError> {
    let (plan, spec, index) = s.trial(&id, &trial, q.practice)?;
    let (dir, record) = s.stimulus(plan, spec, index)?;
    let path = spv_path(&dir, frame_index(&k, record.frame_count)?);
    tokio::task::spawn_blocking(move || {
        let img = read_pgm(&path).map_err(|e| ApiError::internal(format!("cannot read frame: {}", short(&e.to_string()))))?;
        gray_png(img)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

/// Source video frames, offered for practice trials only.
async fn original(
    State(s): State<Arc<AppState>>,
    UrlPath((id, trial, k)): UrlPath<(String, String, String)>,
    Query(q): Query<PracticeQuery>,
) -> Result<Response, ApiError> {
    if !q.practice {
        return Err(ApiError::not_found("UnknownFrame", "original frames are only served for practice trials"));
    }
    let (plan, spec, index) = s.trial(&id, &trial, true)?;
    let (_, record) = s.stimulus(plan, spec, index)?;
    let k = frame_index(&k, record.frame_count)?;
    let catalog = s.catalog.as_ref().ok_or_else(|| ApiError::not_found("UnknownFrame", "server has no catalog"))?;
    let clip = catalog
        .clip(&spec.clip_id)
        .ok_or_else(|| ApiError::not_found("UnknownFrame", format!("no source video for practice trial {index}")))?;
    let path = frame_path(&catalog.clip_dir(clip), k)
        .ok_or_else(|| ApiError::not_found("UnknownFrame", format!("no source frame {k} for practice trial {index}")))?;
    tokio::task::spawn_blocking(move || {
        let bad = |e: phosphor_core::netpbm::NetpbmError| ApiError::internal(format!("cannot read frame: {}", short(&e.to_string())));
        if path.extension().is_some_and(|e| e == "ppm") {
            rgb_png(read_ppm(&path).map_err(bad)?)
        } else {
            gray_png(read_pgm(&path).map_err(bad)?)
        }
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

/// Drops the path from a file error; paths contain clip ids.
fn short(msg: &str) -> &str {
    msg.rsplit(": ").next().unwrap_or(msg)
}

async fn response(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let unprocessable = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "SchemaViolation", m);
    let envelope: ResponseEnvelope = serde_json::from_slice(&body).map_err(|e| unprocessable(e.to_string()))?;
    envelope.validate().map_err(|e| unprocessable(e.to_string()))?;
    let plan = s
        .sessions
        .get(&envelope.session_id)
        .ok_or_else(|| ApiError::not_found("UnknownSession", format!("no session {:?}", envelope.session_id)))?;
    if plan.trial(envelope.trial_index, envelope.practice).is_none() {
        return Err(ApiError::not_found(
            "UnknownTrial",
            format!("session {:?} has no {}trial {}", envelope.session_id, if envelope.practice { "practice " } else { "" }, envelope.trial_index),
        ));
    }
    let ack = json!({
        "schema_version": SCHEMA_VERSION,
        "session_id": envelope.session_id,
        "trial_index": envelope.trial_index,
        "practice": envelope.practice,
    });
    let (reply, rx) = oneshot::channel();
    s.writer
        .send(AppendRequest { envelope, reply })
        .await
        .map_err(|_| ApiError::internal("response log writer stopped"))?;
    match rx.await.map_err(|_| ApiError::internal("response log writer stopped"))? {
        Ok(Appended::Accepted) => {
            let mut body = ack;
            body["status"] = json!("accepted");
            Ok(Json(body))
        }
        Ok(Appended::Duplicate) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "Duplicate",
            format!("trial {} already has a response", ack["trial_index"]),
        )),
        Err(e) => {
            log::error!("appending a response failed: {e}");
            Err(ApiError::internal("could not store the response"))
        }
    }
}

/// Serves until interrupted. Prints the bound address on stdout first.
pub fn cmd_serve(cfg: &RunConfig) -> Result<Value, CliError> {
    let state = load_state(cfg)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::internal("Runtime", e.to_string()))?;
    let addr = format!("{}:{}", cfg.serve.host, cfg.serve.port);
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::input("BindFailed", format!("{addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::internal("BindFailed", e.to_string()))?;
        println!("{}", json!({ "command": "serve", "listening": local.to_string(), "sessions": state.session_count() }));
        let _ = std::io::stdout().flush();
        log::info!("serving {} sessions on http://{local}", state.session_count());
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::internal("ServeFailed", e.to_string()))?;
        Ok(json!({ "command": "serve", "stopped": local.to_string() }))
    })
}
