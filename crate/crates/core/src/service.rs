//! HTTP JSON API over a [`Store`].
//!
//! Responses use a fixed envelope: `{"data": ...}` on success and
//! `{"error": {"code", "message", "detail"}}` on failure. Mutating requests
//! may carry an `idempotency-key` header; a repeat with the same key replays
//! the first response without touching the journal. The acting user comes
//! from `x-actor`, and clients that own their timers (open/close events) may
//! pin the event time with `x-client-timestamp` (epoch ms).

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytics::{self, export_report, Report, ReportFormat};
use crate::error::Error;
use crate::geometry::Polygon;
use crate::metrics::EvalRequest;
use crate::store::{PredictionFile, Stage, Store};
use crate::workflow::{transition_table, Arm};

const MAX_BODY: usize = 64 * 1024 * 1024;

pub struct AppState {
    store: RwLock<Store>,
    idempotency: Mutex<HashMap<String, Cached>>,
}

#[derive(Clone)]
enum Cached {
    InFlight,
    Done { status: StatusCode, content_type: Option<HeaderValue>, body: Bytes },
}

impl AppState {
    pub fn new(store: Store) -> Arc<Self> {
        Arc::new(Self { store: RwLock::new(store), idempotency: Mutex::new(HashMap::new()) })
    }

    pub fn store(&self) -> std::sync::RwLockReadGuard<'_, Store> {
        self.store.read().expect("store lock poisoned")
    }

    fn store_mut(&self) -> std::sync::RwLockWriteGuard<'_, Store> {
        self.store.write().expect("store lock poisoned")
    }
}

/// API error: a domain [`Error`] rendered in the error envelope.
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::Invalid(_) | Error::Json(_) => StatusCode::BAD_REQUEST,
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::Conflict(_) => StatusCode::CONFLICT,
        Error::IllegalTransition { .. } | Error::Rejected(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let detail = match &self.0 {
            Error::IllegalTransition { state, action } => json!({ "state": state, "action": action }),
            _ => Value::Null,
        };
        let body = json!({ "error": { "code": self.0.code(), "message": self.0.to_string(), "detail": detail } });
        (status_for(&self.0), axum::Json(body)).into_response()
    }
}

type ApiResult = std::result::Result<Response, ApiError>;

fn ok<T: Serialize>(status: StatusCode, data: T) -> ApiResult {
    Ok((status, axum::Json(json!({ "data": data }))).into_response())
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, Error> {
    Ok(serde_json::from_slice(body)?)
}

/// Like [`parse`], but an empty body means "all defaults".
fn parse_or_default<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, Error> {
    if body.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        parse(body)
    }
}

struct Caller {
    actor: String,
    now: i64,
}

fn caller(headers: &HeaderMap) -> Result<Caller, Error> {
    let actor = headers
        .get("x-actor")
        .and_then(|v| v.to_str().ok())
        .filter(|s| !s.trim().is_empty())
        .unwrap_or("anonymous")
        .to_string();
    let now = match headers.get("x-client-timestamp") {
        Some(v) => v
            .to_str()
            .ok()
            .and_then(|s| s.parse::<i64>().ok())
            .ok_or_else(|| Error::invalid("x-client-timestamp must be integer epoch milliseconds"))?,
        None => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64),
    };
    Ok(Caller { actor, now })
}

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let mut app = Router::new()
        .route("/healthz", get(healthz))
        .route("/transitions", get(transitions))
        .route("/jobs", post(create_job))
        .route("/jobs/{job_id}", get(get_job))
        .route("/jobs/{job_id}/predictions", post(ingest_predictions))
        .route("/images/{image_id}", get(get_image))
        .route("/images/{image_id}/events", get(image_events))
        .route("/images/{image_id}/clues", get(get_clues))
        .route("/images/{image_id}/clues/{clue_id}/convert", post(convert_clue))
        .route("/images/{image_id}/clues/{clue_id}/dismiss", post(dismiss_clue))
        .route("/images/{image_id}/annotations", get(get_annotations).post(draw_annotation))
        .route("/images/{image_id}/annotations/{annotation_id}/edit", post(edit_annotation))
        .route("/images/{image_id}/annotations/{annotation_id}/approve", post(approve_annotation))
        .route("/images/{image_id}/qc1/{op}", post(qc1))
        .route("/images/{image_id}/qc2/{op}", post(qc2))
        .route("/images/{image_id}/missed", post(flag_missed))
        .route("/reports/conversion", get(report_conversion))
        .route("/reports/productivity", get(report_productivity))
        .route("/reports/comparison", get(report_comparison))
        .route("/eval", post(eval));
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", tower_http::services::ServeDir::new(dir));
    }
    app.layer(middleware::from_fn_with_state(state.clone(), idempotency)).with_state(state)
}

/// Replays cached responses for repeated `idempotency-key`s on POSTs.
async fn idempotency(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let key = match req.headers().get("idempotency-key").and_then(|v| v.to_str().ok()) {
        Some(k) if req.method() == Method::POST => format!("{} {}", req.uri().path(), k),
        _ => return next.run(req).await,
    };
    {
        let mut cache = state.idempotency.lock().expect("idempotency lock");
        match cache.get(&key) {
            Some(Cached::Done { status, content_type, body }) => {
                let mut resp = Response::new(Body::from(body.clone()));
                *resp.status_mut() = *status;
                if let Some(ct) = content_type {
                    resp.headers_mut().insert(header::CONTENT_TYPE, ct.clone());
                }
                resp.headers_mut().insert("idempotent-replay", HeaderValue::from_static("true"));
                return resp;
            }
            Some(Cached::InFlight) => {
                return ApiError(Error::conflict("a request with this idempotency key is in progress")).into_response()
            }
            None => {
                cache.insert(key.clone(), Cached::InFlight);
            }
        }
    }
    let resp = next.run(req).await;
    let (parts, body) = resp.into_parts();
    let bytes = match axum::body::to_bytes(body, MAX_BODY).await {
        Ok(b) => b,
        Err(_) => {
            state.idempotency.lock().expect("idempotency lock").remove(&key);
            return StatusCode::INTERNAL_SERVER_ERROR.into_response();
        }
    };
    {
        let mut cache = state.idempotency.lock().expect("idempotency lock");
        if parts.status.is_server_error() {
            cache.remove(&key);
        } else {
            cache.insert(
                key,
                Cached::Done {
                    status: parts.status,
                    content_type: parts.headers.get(header::CONTENT_TYPE).cloned(),
                    body: bytes.clone(),
                },
            );
        }
    }
    Response::from_parts(parts, Body::from(bytes))
}

async fn healthz() -> ApiResult {
    ok(StatusCode::OK, json!({ "status": "ok" }))
}

async fn transitions() -> ApiResult {
    ok(StatusCode::OK, transition_table())
}

async fn create_job(State(st): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let c = caller(&headers)?;
    let manifest = parse(&body)?;
    let (job, created) = st.store_mut().ingest_job(&manifest, &c.actor, c.now)?;
    ok(if created { StatusCode::CREATED } else { StatusCode::OK }, job)
}

#[derive(Serialize)]
struct ImageSummary<'a> {
    image_id: &'a str,
    job_id: &'a str,
    arm: Arm,
    state: crate::workflow::WorkflowState,
    file_ref: &'a str,
    n_instances: usize,
    n_clues: usize,
    n_annotations: usize,
    n_approved: usize,
    missed_damages: u32,
}

fn summarize<'a>(img: &'a crate::store::ImageState, arm: Arm) -> ImageSummary<'a> {
    ImageSummary {
        image_id: &img.record.image_id,
        job_id: &img.record.job_id,
        arm,
        state: img.state,
        file_ref: &img.record.file_ref,
        n_instances: img.instances.len(),
        n_clues: img.clues.len(),
        n_annotations: img.annotations.len(),
        n_approved: img.approved.len(),
        missed_damages: img.missed_damages,
    }
}

async fn get_job(State(st): State<Arc<AppState>>, Path(job_id): Path<String>) -> ApiResult {
    let store = st.store();
    let job = store.state().job(&job_id)?;
    let images: Vec<_> = job.images.values().map(|i| summarize(i, job.job.arm)).collect();
    ok(StatusCode::OK, json!({ "job": job.job, "last_seq": job.last_seq, "images": images }))
}

#[derive(Deserialize)]
struct PredictionQuery {
    score_threshold: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PredictionBody {
    One(PredictionFile),
    Many(Vec<PredictionFile>),
}

async fn ingest_predictions(
    State(st): State<Arc<AppState>>,
    Path(job_id): Path<String>,
    Query(q): Query<PredictionQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let c = caller(&headers)?;
    let files = match parse::<PredictionBody>(&body)? {
        PredictionBody::One(f) => vec![f],
        PredictionBody::Many(v) => v,
    };
    let mut store = st.store_mut();
    {
        let job = store.state().job(&job_id)?;
        if let Some(f) = files.iter().find(|f| !job.images.contains_key(&f.image_id)) {
            return Err(Error::not_found(format!("image {} in job {job_id}", f.image_id)).into());
        }
    }
    let mut out = Vec::new();
    for f in &files {
        let clues = store.ingest_predictions(f, q.score_threshold, &c.actor, c.now)?;
        out.push(json!({ "image_id": f.image_id, "clues": clues }));
    }
    ok(StatusCode::OK, out)
}

async fn get_image(State(st): State<Arc<AppState>>, Path(image_id): Path<String>) -> ApiResult {
    let store = st.store();
    let img = store.state().image_state(&image_id)?;
    let arm = store.state().job(&img.record.job_id)?.job.arm;
    ok(StatusCode::OK, summarize(img, arm))
}

async fn image_events(State(st): State<Arc<AppState>>, Path(image_id): Path<String>) -> ApiResult {
    let store = st.store();
    let img = store.state().image_state(&image_id)?;
    let job = store.state().job(&img.record.job_id)?;
    let events: Vec<_> = job.image_events(&image_id).collect();
    ok(StatusCode::OK, events)
}

async fn get_clues(State(st): State<Arc<AppState>>, Path(image_id): Path<String>) -> ApiResult {
    let store = st.store();
    ok(StatusCode::OK, &store.state().image_state(&image_id)?.clues)
}

#[derive(Default, Deserialize)]
struct ConvertBody {
    polygon: Option<Polygon>,
    damage_label: Option<String>,
}

async fn convert_clue(
    State(st): State<Arc<AppState>>,
    Path((image_id, clue_id)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let c = caller(&headers)?;
    let b: ConvertBody = parse_or_default(&body)?;
    let ann = st.store_mut().convert_clue(&image_id, &clue_id, b.polygon, b.damage_label, &c.actor, c.now)?;
    ok(StatusCode::OK, ann)
}

async fn dismiss_clue(
    State(st): State<Arc<AppState>>,
    Path((image_id, clue_id)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult {
    let c = caller(&headers)?;
    let clue = st.store_mut().dismiss_clue(&image_id, &clue_id, &c.actor, c.now)?;
    ok(StatusCode::OK, clue)
}

async fn get_annotations(State(st): State<Arc<AppState>>, Path(image_id): Path<String>) -> ApiResult {
    ok(StatusCode::OK, st.store().export_annotations(&image_id)?)
}

#[derive(Deserialize)]
struct DrawBody {
    polygon: Polygon,
    damage_label: Option<String>,
}

async fn draw_annotation(
    State(st): State<Arc<AppState>>,
    Path(image_id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let c = caller(&headers)?;
    let b: DrawBody = parse(&body)?;
    let ann = st.store_mut().draw_annotation(&image_id, b.polygon, b.damage_label, &c.actor, c.now)?;
    ok(StatusCode::CREATED, ann)
}

#[derive(Deserialize)]
struct EditBody {
    polygon: Polygon,
}

async fn edit_annotation(
    State(st): State<Arc<AppState>>,
    Path((image_id, annotation_id)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let c = caller(&headers)?;
    let b: EditBody = parse(&body)?;
    let ann = st.store_mut().edit_annotation(&image_id, &annotation_id, b.polygon, &c.actor, c.now)?;
    ok(StatusCode::OK, ann)
}

async fn approve_annotation(
    State(st): State<Arc<AppState>>,
    Path((image_id, annotation_id)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult {
    let c = caller(&headers)?;
    st.store_mut().approve_annotation(&image_id, &annotation_id, &c.actor, c.now)?;
    ok(StatusCode::OK, json!({ "image_id": image_id, "annotation_id": annotation_id, "approved": true }))
}

fn stage_op(st: &AppState, stage: Stage, image_id: &str, op: &str, headers: &HeaderMap) -> ApiResult {
    let c = caller(headers)?;
    let mut store = st.store_mut();
    let state = match op {
        "open" => store.open_stage(image_id, stage, &c.actor, c.now)?,
        "close" => store.close_stage(image_id, stage, &c.actor, c.now)?,
        "complete" => store.complete_stage(image_id, stage, &c.actor, c.now)?,
        other => return Err(Error::not_found(format!("{} operation `{other}`", stage.as_str())).into()),
    };
    ok(StatusCode::OK, json!({ "image_id": image_id, "state": state }))
}

async fn qc1(
    State(st): State<Arc<AppState>>,
    Path((image_id, op)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult {
    stage_op(&st, Stage::Qc1, &image_id, &op, &headers)
}

async fn qc2(
    State(st): State<Arc<AppState>>,
    Path((image_id, op)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult {
    stage_op(&st, Stage::Qc2, &image_id, &op, &headers)
}

#[derive(Default, Deserialize)]
struct MissedBody {
    polygon: Option<Polygon>,
    damage_label: Option<String>,
    note: Option<String>,
}

async fn flag_missed(
    State(st): State<Arc<AppState>>,
    Path(image_id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let c = caller(&headers)?;
    let b: MissedBody = parse_or_default(&body)?;
    let mut store = st.store_mut();
    let ann = store.flag_missed(&image_id, b.polygon, b.damage_label, b.note, &c.actor, c.now)?;
    let missed = store.state().image_state(&image_id)?.missed_damages;
    ok(StatusCode::OK, json!({ "image_id": image_id, "annotation": ann, "missed_damages": missed }))
}

#[derive(Deserialize)]
struct ReportQuery {
    job: Option<String>,
    arm: Option<String>,
    format: Option<String>,
}

impl ReportQuery {
    fn format(&self) -> Result<ReportFormat, Error> {
        self.format.as_deref().map_or(Ok(ReportFormat::Structured), str::parse)
    }
}

fn report_response(report: Report, format: ReportFormat) -> ApiResult {
    match format {
        ReportFormat::Structured => ok(StatusCode::OK, report),
        ReportFormat::Tabular => Ok((
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            export_report(&report, ReportFormat::Tabular),
        )
            .into_response()),
    }
}

/// Without `job`, covers every job whose images have all completed QC1.
async fn report_conversion(State(st): State<Arc<AppState>>, Query(q): Query<ReportQuery>) -> ApiResult {
    let format = q.format()?;
    let store = st.store();
    let state = store.state();
    let rows = match &q.job {
        Some(id) => analytics::conversion_table([state.job(id)?])?,
        None => analytics::conversion_table(
            state.jobs.values().filter(|j| j.images.values().all(|i| i.state.qc1_completed())),
        )?,
    };
    report_response(Report::Conversion(rows), format)
}

async fn report_productivity(State(st): State<Arc<AppState>>, Query(q): Query<ReportQuery>) -> ApiResult {
    let format = q.format()?;
    let arm: Arm = q.arm.as_deref().ok_or_else(|| Error::invalid("query parameter `arm` is required"))?.parse()?;
    let store = st.store();
    let report = analytics::productivity_report(store.state().jobs.values(), arm)?;
    report_response(Report::Productivity(report), format)
}

async fn report_comparison(State(st): State<Arc<AppState>>, Query(q): Query<ReportQuery>) -> ApiResult {
    let format = q.format()?;
    let store = st.store();
    let cmp = analytics::arm_comparison(store.state().jobs.values())?;
    report_response(Report::Comparison(cmp), format)
}

async fn eval(body: Bytes) -> ApiResult {
    let doc = std::str::from_utf8(&body).map_err(|_| Error::invalid("request body is not UTF-8"))?;
    let req = EvalRequest::from_json(doc)?;
    // Rasterizing large frames is CPU-bound; keep it off the async workers.
    let report = tokio::task::spawn_blocking(move || req.evaluate())
        .await
        .map_err(|e| Error::Io(std::io::Error::other(e)))??;
    ok(StatusCode::OK, report)
}

/// Binds and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, store: Store, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let app = router(AppState::new(store), ui_dir);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
