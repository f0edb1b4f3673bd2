//! HTTP API for the template-authoring UI and for remote detection.
//!
//! Every response body is a JSON object carrying `"version": 1`. Failures
//! use the same envelope with an `error` member holding a code and message.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::cvml::{parse_cvml, FrameProcessor, TypeMapping};
use crate::events::{
    derive_temporal_constraints, evaluate_event, left_item_template, EventStep, EventTemplate, SearchMode,
    TemporalConstraint, TimelineBar,
};
use crate::geometry::{BoxSpec, Rect};
use crate::kb::{FactStore, SharedStore};
use crate::monitor::{DetectionFeed, Monitor, MonitorConfig, TemplateRegistry};
use crate::sketch::{sketch_to_frame_template, Sketch, SketchBox};
use crate::spatial::{RelationMode, SpatialConfig, DEFAULT_CACHED};
use crate::templates::Matcher;
use crate::{EntityId, EntityType, Error, FrameNum};

pub const API_VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub spatial: SpatialConfig,
    pub mapping: TypeMapping,
    pub monitor: MonitorConfig,
    /// Directory served under `/assets` (per-frame images).
    pub assets_dir: Option<PathBuf>,
    /// Directory with the built UI, served for every other path.
    pub ui_dir: Option<PathBuf>,
}

struct Dataset {
    name: String,
    store: SharedStore,
}

/// Shared state behind the router.
pub struct AppState {
    config: ServiceConfig,
    datasets: RwLock<BTreeMap<String, Arc<Dataset>>>,
    next_id: AtomicU64,
    /// One monitor per dataset with registered templates.
    monitors: Mutex<BTreeMap<String, Monitor>>,
    feed: Arc<DetectionFeed>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            config,
            datasets: RwLock::default(),
            next_id: AtomicU64::new(1),
            monitors: Mutex::default(),
            feed: DetectionFeed::new(),
        })
    }

    /// Registers an already-populated store, returning its dataset id.
    pub fn add_dataset(&self, name: &str, store: FactStore) -> String {
        let id = format!("ds{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let ds = Dataset {
            name: name.to_string(),
            store: store.shared(),
        };
        self.datasets.write().insert(id.clone(), Arc::new(ds));
        id
    }

    /// Store behind a dataset id, for callers feeding frames from outside.
    pub fn dataset_store(&self, id: &str) -> Option<SharedStore> {
        self.datasets.read().get(id).map(|d| d.store.clone())
    }

    fn dataset(&self, id: &str) -> Result<Arc<Dataset>, ApiError> {
        self.datasets
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown dataset `{id}`")))
    }

    /// Runs one tick of every monitor; returns the number of new detections.
    pub fn tick_monitors(&self) -> usize {
        let mut n = 0;
        for (ds, m) in self.monitors.lock().iter_mut() {
            let r = m.tick();
            for f in &r.failures {
                log::warn!("monitor {ds}: {f}");
            }
            n += r.fired.len();
        }
        n
    }

    pub fn feed(&self) -> &Arc<DetectionFeed> {
        &self.feed
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::NotYetProcessed { .. } => (StatusCode::NOT_FOUND, "not_processed"),
            Error::UnknownArea(_) => (StatusCode::NOT_FOUND, "unknown_area"),
            Error::DuplicateId(_) | Error::DuplicateStatic(_) | Error::StaticCollision(_) => {
                (StatusCode::CONFLICT, "duplicate")
            }
            Error::Cvml(_) | Error::Json(_) => (StatusCode::BAD_REQUEST, "malformed"),
            Error::Io(_) | Error::Snapshot(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            _ => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "version": API_VERSION,
            "error": { "code": self.code, "message": self.message },
        });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn ok(mut v: Value) -> ApiResult {
    v["version"] = json!(API_VERSION);
    Ok(Json(v))
}

fn parse_body<T: DeserializeOwned>(body: &str) -> Result<T, ApiError> {
    serde_json::from_str(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

#[derive(Debug, Deserialize)]
struct StaticSpec {
    id: String,
    #[serde(rename = "box")]
    bbox: SketchBox,
    #[serde(default)]
    orient: f64,
}

#[derive(Debug, Deserialize)]
struct UploadRequest {
    #[serde(default)]
    name: Option<String>,
    cvml: String,
    #[serde(default)]
    statics: Vec<StaticSpec>,
}

#[derive(Debug, Serialize)]
struct OverlayEntity {
    id: EntityId,
    #[serde(rename = "type")]
    entity_type: EntityType,
    #[serde(rename = "box")]
    bbox: SketchBox,
    bounds: Rect,
    orient: f64,
}

fn overlay_box(r: &Rect) -> SketchBox {
    SketchBox {
        xc: (r.min_x + r.max_x) / 2.0,
        yc: (r.min_y + r.max_y) / 2.0,
        w: r.max_x - r.min_x,
        h: r.max_y - r.min_y,
    }
}

fn summary(id: &str, ds: &Dataset) -> Value {
    let store = ds.store.read();
    json!({
        "id": id,
        "name": ds.name,
        "frames": store.processed_frames().count(),
        "entities": store.entity_count(),
        "basic_facts": store.basic_fact_count(),
        "cached_facts": store.cached_fact_count(),
        "high_water": store.high_water(),
    })
}

async fn upload_dataset(State(st): State<Arc<AppState>>, body: String) -> ApiResult {
    let req = if body.trim_start().starts_with('{') {
        parse_body::<UploadRequest>(&body)?
    } else {
        UploadRequest {
            name: None,
            cvml: body,
            statics: Vec::new(),
        }
    };
    let st2 = st.clone();
    let (id, ds) = tokio::task::spawn_blocking(move || -> Result<(String, Arc<Dataset>), ApiError> {
        let parsed = parse_cvml(&req.cvml).map_err(Error::from)?;
        let mut store = FactStore::new();
        for s in &req.statics {
            store.assert_static_entity(EntityId::from(s.id.as_str()), s.bbox.clone().into(), s.orient)?;
        }
        let proc = FrameProcessor::new(st2.config.spatial, st2.config.mapping.clone());
        proc.process_dataset(&mut store, &parsed)?;
        let name = req.name.unwrap_or(parsed.name);
        let id = st2.add_dataset(&name, store);
        let ds = st2.dataset(&id)?;
        Ok((id, ds))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    ok(json!({ "dataset": summary(&id, &ds) }))
}

async fn get_frame(State(st): State<Arc<AppState>>, Path((id, n)): Path<(String, FrameNum)>) -> ApiResult {
    let ds = st.dataset(&id)?;
    let store = ds.store.read();
    store.ensure_processed(n)?;
    let entities: Vec<OverlayEntity> = store
        .frame_facts(n)
        .map(|f| OverlayEntity {
            id: f.entity.clone(),
            entity_type: f.entity_type,
            bbox: overlay_box(&f.bounds),
            bounds: f.bounds,
            orient: f.orient,
        })
        .collect();
    let statics: Vec<OverlayEntity> = store
        .statics()
        .map(|s| OverlayEntity {
            id: s.id.clone(),
            entity_type: EntityType::Static,
            bbox: overlay_box(&s.bounds),
            bounds: s.bounds,
            orient: s.orient,
        })
        .collect();
    ok(json!({ "dataset": id, "frame": n, "entities": entities, "statics": statics }))
}

async fn get_range(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let ds = st.dataset(&id)?;
    let store = ds.store.read();
    let (first, last) = match store.frame_range() {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    ok(json!({ "dataset": id, "first": first, "last": last, "high_water": store.high_water() }))
}

async fn add_static(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: String) -> ApiResult {
    let spec: StaticSpec = parse_body(&body)?;
    let ds = st.dataset(&id)?;
    let b: BoxSpec = spec.bbox.clone().into();
    ds.store.write().assert_static_entity(EntityId::from(spec.id.as_str()), b, spec.orient)?;
    ok(json!({ "dataset": id, "static": spec.id }))
}

async fn frame_template(State(st): State<Arc<AppState>>, body: String) -> ApiResult {
    let sketch: Sketch = parse_body(&body)?;
    let t = sketch_to_frame_template(&sketch, &st.config.spatial, &DEFAULT_CACHED)?;
    ok(json!({ "template": t, "text": t.to_string() }))
}

#[derive(Debug, Deserialize)]
struct EventRequest {
    id: String,
    steps: Vec<EventStep>,
    #[serde(default)]
    bars: Vec<TimelineBar>,
    /// Constraints added on top of those derived from the bars.
    #[serde(default)]
    constraints: Vec<TemporalConstraint>,
}

async fn event_template(body: String) -> ApiResult {
    let req: EventRequest = parse_body(&body)?;
    let mut constraints = derive_temporal_constraints(&req.bars)?;
    constraints.extend(req.constraints);
    let ev = EventTemplate {
        id: req.id,
        steps: req.steps,
        constraints,
    };
    ev.validate()?;
    ok(json!({ "template": ev }))
}

/// A built-in event by name, or a full template.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum EventSpec {
    Builtin(String),
    Template(EventTemplate),
}

impl EventSpec {
    fn resolve(self) -> Result<EventTemplate, ApiError> {
        match self {
            EventSpec::Builtin(name) if name == "left_item" => Ok(left_item_template()),
            EventSpec::Builtin(name) => Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid",
                format!("unknown built-in event `{name}`"),
            )),
            EventSpec::Template(t) => {
                t.validate()?;
                Ok(t)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
struct DetectRequest {
    dataset: String,
    event: EventSpec,
    #[serde(default)]
    mode: SearchMode,
    #[serde(default)]
    cursor: Option<FrameNum>,
    #[serde(default)]
    relation_mode: Option<RelationMode>,
}

async fn detect(State(st): State<Arc<AppState>>, body: String) -> ApiResult {
    let req: DetectRequest = parse_body(&body)?;
    let ds = st.dataset(&req.dataset)?;
    let ev = req.event.resolve()?;
    let spatial = st.config.spatial;
    let rmode = req.relation_mode.unwrap_or(RelationMode::Cached);
    let detections = tokio::task::spawn_blocking(move || {
        let store = ds.store.read();
        evaluate_event(Matcher::new(&store, spatial, rmode), &ev, req.mode, req.cursor)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let lines: Vec<String> = detections.iter().map(|d| d.to_string()).collect();
    ok(json!({ "dataset": req.dataset, "detections": detections, "lines": lines }))
}

#[derive(Debug, Deserialize)]
struct RegisterRequest {
    dataset: String,
    template: EventSpec,
}

async fn register_template(State(st): State<Arc<AppState>>, body: String) -> ApiResult {
    let req: RegisterRequest = parse_body(&body)?;
    let ds = st.dataset(&req.dataset)?;
    let ev = req.template.resolve()?;
    let id = ev.id.clone();
    let mut monitors = st.monitors.lock();
    if monitors.values().any(|m| m.registry().get(&id).is_some()) {
        return Err(Error::DuplicateId(id).into());
    }
    let m = monitors.entry(req.dataset.clone()).or_insert_with(|| {
        Monitor::new(&req.dataset, ds.store.clone(), TemplateRegistry::new(), st.config.monitor.clone())
            .with_feed(st.feed.clone())
    });
    m.registry().add(ev)?;
    ok(json!({ "dataset": req.dataset, "template": id }))
}

async fn remove_template(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let removed = st.monitors.lock().values().any(|m| m.registry().remove(&id));
    if !removed {
        return Err(ApiError::not_found(format!("no registered template `{id}`")));
    }
    ok(json!({ "template": id, "removed": true }))
}

#[derive(Debug, Deserialize)]
struct SinceQuery {
    #[serde(default)]
    since: u64,
}

async fn list_detections(State(st): State<Arc<AppState>>, Query(q): Query<SinceQuery>) -> ApiResult {
    let records = st.feed.since(q.since);
    let last = records.last().map_or(q.since, |r| r.seq);
    ok(json!({ "detections": records, "last_seq": last }))
}

async fn health(State(st): State<Arc<AppState>>) -> ApiResult {
    let templates: usize = st.monitors.lock().values().map(|m| m.registry().ids().len()).sum();
    ok(json!({ "status": "ok", "datasets": st.datasets.read().len(), "monitored_templates": templates }))
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

/// Builds the router over `state`.
pub fn router(state: Arc<AppState>) -> Router {
    let mut r = Router::new()
        .route("/health", get(health))
        .route("/datasets", post(upload_dataset))
        .route("/datasets/{id}/frames/{n}", get(get_frame))
        .route("/datasets/{id}/range", get(get_range))
        .route("/datasets/{id}/statics", post(add_static))
        .route("/templates/frame", post(frame_template))
        .route("/templates/event", post(event_template))
        .route("/detect", post(detect))
        .route("/monitor/templates", post(register_template))
        .route("/monitor/templates/{id}", delete(remove_template))
        .route("/monitor/detections", get(list_detections))
        .layer(DefaultBodyLimit::max(512 * 1024 * 1024));
    if let Some(dir) = &state.config.assets_dir {
        r = r.nest_service("/assets", ServeDir::new(dir));
    }
    r = match &state.config.ui_dir {
        Some(dir) => r.fallback_service(ServeDir::new(dir)),
        None => r.fallback(fallback),
    };
    r.with_state(state)
}

/// Serves the API on `addr` until `stop` is set, ticking the monitors on a
/// background thread at the configured poll period.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr, stop: Arc<AtomicBool>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let ticker = {
        let st = state.clone();
        let stop = stop.clone();
        std::thread::spawn(move || {
            let period = st.config.monitor.poll_period;
            while !stop.load(Ordering::Relaxed) {
                let t0 = Instant::now();
                st.tick_monitors();
                while !stop.load(Ordering::Relaxed) && t0.elapsed() < period {
                    std::thread::sleep(Duration::from_millis(20).min(period));
                }
            }
        })
    };
    let shutdown = {
        let stop = stop.clone();
        async move {
            while !stop.load(Ordering::Relaxed) {
                tokio::time::sleep(Duration::from_millis(50)).await;
            }
        }
    };
    let result = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await;
    stop.store(true, Ordering::Relaxed);
    let _ = ticker.join();
    result
}
