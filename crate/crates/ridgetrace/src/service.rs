//! HTTP+JSON API over tracing sessions.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | GET | `/health` | | `{"ok": true}` |
//! | POST | `/sessions` | `{"volume", "meta"?, "graph"}` or `{}` for the served dataset | session summary |
//! | GET | `/sessions/{id}` | | `status` op result |
//! | DELETE | `/sessions/{id}` | | `{"closed": id}` |
//! | POST | `/sessions/{id}/{op}` | op arguments | op result |
//! | GET | `/sessions/{id}/slice` | `axis, index, lo?, hi?` | 8-bit image |
//! | GET | `/sessions/{id}/mip` | `axis, from?, to?, lo?, hi?` | 8-bit image |
//! | GET | `/sessions/{id}/graph` | | nodes and arcs in voxel coordinates |
//! | GET | `/sessions/{id}/swc` | | SWC text |
//!
//! Ops and their arguments (`units` is `"physical"`, the default, or
//! `"voxel"` and applies to every coordinate in the request):
//!
//! - `snap {cursor}`: nearest graph point and its whole arc
//! - `flashlight {cursor, radius?}`: arc fragments inside the ball
//! - `start {cursor, from?}`: start a guided segment, optionally off node `from`
//! - `preview {cursor}`: shortest path from the start to the cursor
//! - `accept {}`: append the preview
//! - `manual {points}`: append a raw stroke
//! - `join {root}`: attach a branch to the nearest other tree
//! - `delete {nodes}`, `undo {}`, `export {}`, `status {}`
//!
//! Errors are `{"code", "message"}` with a stable `code`. Preview requests
//! are coalesced per session: a preview still waiting for the session when
//! a newer one arrives is answered with `superseded` (HTTP 409).

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, Weak};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ridgetrace_core::geom::Vec3;
use ridgetrace_core::pathing::{PathError, PathResult, WeightParams};
use ridgetrace_core::session::{Edit, EditError, Session, SessionConfig, SessionError};
use ridgetrace_core::spatial::GraphLocation;
use ridgetrace_core::volume::FilterParams;
use ridgetrace_core::TracingContext;

use crate::dataset::{Dataset, DatasetError, DatasetSource};
use crate::slice::{project, Axis, SliceError, Window};
use crate::swc::export_swc;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }
    fn bad_request(m: impl Into<String>) -> Self {
        Self::new(400, "bad_request", m)
    }
    fn not_found(id: &str) -> Self {
        Self::new(404, "not_found", format!("no session {id:?}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match &e {
            SessionError::NotStarted => "not_started",
            SessionError::NoPreview => "no_preview",
            SessionError::NothingToAccept => "nothing_to_accept",
            SessionError::NoPath => "no_path",
            SessionError::GapTooLarge { .. } => "gap_too_large",
            SessionError::NothingToJoin => "nothing_to_join",
            SessionError::Path(PathError::StaleLocation) => "stale_location",
            SessionError::Path(_) => "path_error",
            SessionError::Edit(EditError::UnknownNode(_)) => "unknown_node",
            SessionError::Edit(EditError::Empty) => "empty",
            SessionError::Edit(EditError::NonFinite) => "non_finite",
            SessionError::Edit(EditError::NotARoot(_)) => "not_a_root",
            SessionError::Edit(EditError::Cycle { .. }) => "cycle",
            SessionError::Edit(EditError::EmptyLog) => "empty_log",
            SessionError::Edit(EditError::DuplicateId(_)) => "duplicate_id",
        };
        Self::new(422, code, e.to_string())
    }
}

impl From<SliceError> for ApiError {
    fn from(e: SliceError) -> Self {
        let code = match e {
            SliceError::IndexOutOfRange { .. } => "index_out_of_range",
            SliceError::BadWindow => "bad_window",
            SliceError::EmptyRange(..) => "empty_range",
        };
        Self::new(400, code, e.to_string())
    }
}

impl From<DatasetError> for ApiError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Weights(PathError::DimensionMismatch { .. }) => Self::new(422, "dimension_mismatch", e.to_string()),
            e => Self::new(422, "load_failed", e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Physical,
    Voxel,
}

fn to_physical(ctx: &TracingContext, units: Units, p: Vec3) -> Vec3 {
    match units {
        Units::Physical => p,
        Units::Voxel => ctx.to_physical(p),
    }
}

fn polyline(ctx: &TracingContext, pts: &[Vec3]) -> Value {
    let phys: Vec<Vec3> = pts.iter().map(|&p| ctx.to_physical(p)).collect();
    json!({ "voxel": pts, "physical": phys })
}

fn location(ctx: &TracingContext, l: &GraphLocation) -> Value {
    json!({ "arc": l.arc, "index": l.index, "voxel": l.position, "physical": ctx.to_physical(l.position) })
}

fn path_json(ctx: &TracingContext, p: &PathResult) -> Value {
    json!({ "points": polyline(ctx, &p.points), "total_weight": p.total_weight, "traversals": p.traversals })
}

fn args<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T, ApiError> {
    let v = if v.is_null() { json!({}) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| ApiError::bad_request(e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CursorArgs {
    cursor: Vec3,
    #[serde(default)]
    units: Units,
    #[serde(default)]
    radius: Option<f64>,
    #[serde(default)]
    from: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManualArgs {
    points: Vec<Vec3>,
    #[serde(default)]
    units: Units,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JoinArgs {
    root: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeleteArgs {
    nodes: Vec<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoArgs {}

/// Applies one operation to a session. Shared by the HTTP handlers and by
/// interaction-log replay, so both paths behave identically.
pub fn apply(s: &mut Session, op: &str, a: &Value) -> Result<Value, ApiError> {
    let ctx = s.context().clone();
    match op {
        "snap" => {
            let c: CursorArgs = args(a)?;
            let snap = s.snap(to_physical(&ctx, c.units, c.cursor));
            Ok(json!({
                "location": location(&ctx, &snap.location),
                "distance": snap.distance,
                "arc": polyline(&ctx, &snap.arc_points),
            }))
        }
        "flashlight" => {
            let c: CursorArgs = args(a)?;
            if c.radius.is_some_and(|r| !(r.is_finite() && r >= 0.0)) {
                return Err(ApiError::bad_request("radius must be finite and non-negative"));
            }
            let radius = c.radius.unwrap_or(s.config().flashlight_radius);
            let frags = s.flashlight(to_physical(&ctx, c.units, c.cursor), Some(radius));
            let frags: Vec<Value> = frags
                .iter()
                .map(|f| json!({ "arc": f.arc, "start": f.start, "end": f.end, "points": polyline(&ctx, &f.points) }))
                .collect();
            Ok(json!({ "radius": radius, "fragments": frags }))
        }
        "start" => {
            let c: CursorArgs = args(a)?;
            let loc = s.start_trace(to_physical(&ctx, c.units, c.cursor), c.from)?;
            Ok(json!({ "location": location(&ctx, &loc) }))
        }
        "preview" => {
            let c: CursorArgs = args(a)?;
            let p = s.update_preview(to_physical(&ctx, c.units, c.cursor))?;
            Ok(json!({ "path": path_json(&ctx, p) }))
        }
        "accept" => {
            let _: NoArgs = args(a)?;
            Ok(json!({ "nodes": s.accept()? }))
        }
        "manual" => {
            let m: ManualArgs = args(a)?;
            let pts: Vec<Vec3> = m.points.iter().map(|&p| to_physical(&ctx, m.units, p)).collect();
            Ok(json!({ "nodes": s.manual_append(&pts)? }))
        }
        "join" => {
            let j: JoinArgs = args(a)?;
            Ok(json!({ "parent": s.join_branch(j.root)? }))
        }
        "delete" => {
            let d: DeleteArgs = args(a)?;
            s.delete(&d.nodes)?;
            Ok(json!({ "deleted": d.nodes }))
        }
        "undo" => {
            let _: NoArgs = args(a)?;
            let kind = match s.undo()? {
                Edit::Append { .. } => "append",
                Edit::Delete { .. } => "delete",
                Edit::Join { .. } => "join",
            };
            Ok(json!({ "undone": kind }))
        }
        "export" => {
            let _: NoArgs = args(a)?;
            Ok(json!({ "swc": export_swc(s.reconstruction()) }))
        }
        "status" => {
            let _: NoArgs = args(a)?;
            Ok(json!({
                "nodes": s.reconstruction().len(),
                "trees": s.reconstruction().roots().len(),
                "edits": s.reconstruction().log().len(),
                "start": s.anchor().map(|a| json!({ "location": location(&ctx, &a.location), "node": a.node })),
                "preview": s.preview().map(|p| path_json(&ctx, p)),
                "flashlight_radius": s.config().flashlight_radius,
            }))
        }
        _ => Err(ApiError::new(404, "unknown_op", format!("unknown operation {op:?}"))),
    }
}

/// One recorded interaction: seconds since the session opened, the op name
/// and its arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub t: f64,
    pub op: String,
    #[serde(default)]
    pub args: Value,
}

/// Replays a log on a fresh session. Failing interactions are recorded and
/// skipped, as they were when the log was captured.
pub fn replay_interactions(
    ctx: Arc<TracingContext>,
    config: SessionConfig,
    log: &[Interaction],
) -> (Session, Vec<Result<Value, ApiError>>) {
    let mut s = Session::new(ctx, config);
    let results = log.iter().map(|i| apply(&mut s, &i.op, &i.args)).collect();
    (s, results)
}

pub struct SessionSlot {
    pub dataset: Arc<Dataset>,
    session: tokio::sync::Mutex<Session>,
    preview_seq: AtomicU64,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub filter: FilterParams,
    pub weights: WeightParams,
    pub session: SessionConfig,
}

pub struct AppState {
    config: ServiceConfig,
    default: Option<Arc<Dataset>>,
    loaded: Mutex<HashMap<DatasetSource, Weak<Dataset>>>,
    sessions: Mutex<HashMap<String, Arc<SessionSlot>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(config: ServiceConfig, default: Option<Arc<Dataset>>) -> Arc<Self> {
        Arc::new(Self {
            config,
            default,
            loaded: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.sessions.lock().expect("session table").get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    /// Loads a dataset, or reuses the copy already open for the same files.
    fn dataset(&self, src: &DatasetSource) -> Result<Arc<Dataset>, ApiError> {
        if let Some(d) = self.loaded.lock().expect("dataset cache").get(src).and_then(Weak::upgrade) {
            return Ok(d);
        }
        let d = Arc::new(Dataset::open(src, &self.config.filter, &self.config.weights)?);
        self.loaded.lock().expect("dataset cache").insert(src.clone(), Arc::downgrade(&d));
        Ok(d)
    }

    /// Opens a session and returns its id.
    pub fn open(&self, dataset: Arc<Dataset>) -> String {
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let slot = SessionSlot {
            session: tokio::sync::Mutex::new(Session::new(dataset.context.clone(), self.config.session)),
            dataset,
            preview_seq: AtomicU64::new(0),
        };
        self.sessions.lock().expect("session table").insert(id.clone(), Arc::new(slot));
        id
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpenArgs {
    volume: Option<PathBuf>,
    meta: Option<PathBuf>,
    graph: Option<PathBuf>,
}

fn summary(id: &str, d: &Dataset) -> Value {
    let g = d.context.graph();
    json!({
        "id": id,
        "dims": g.dims(),
        "spacing": g.spacing(),
        "nodes": g.nodes().len(),
        "arcs": g.arcs().len(),
        "points": g.num_points(),
        "epsilon": d.context.weighted().epsilon(),
    })
}

async fn open_session(State(st): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let a: OpenArgs = args(&parse_body(&body)?)?;
    let dataset = match (a.volume, a.graph) {
        (Some(v), Some(g)) => {
            let src = DatasetSource::new(&v, a.meta.as_deref(), &g);
            let st2 = st.clone();
            tokio::task::spawn_blocking(move || st2.dataset(&src))
                .await
                .map_err(|e| ApiError::new(500, "internal", e.to_string()))??
        }
        (None, None) => st.default.clone().ok_or_else(|| ApiError::bad_request("no dataset is being served; pass volume and graph"))?,
        _ => return Err(ApiError::bad_request("volume and graph must be given together")),
    };
    let id = st.open(dataset.clone());
    Ok(Json(summary(&id, &dataset)))
}

async fn close_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    st.sessions.lock().expect("session table").remove(&id).ok_or_else(|| ApiError::not_found(&id))?;
    Ok(Json(json!({ "closed": id })))
}

fn parse_body(body: &Bytes) -> Result<Value, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(json!({}));
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON: {e}")))
}

async fn run_op(
    State(st): State<Arc<AppState>>,
    Path((id, op)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let a = parse_body(&body)?;
    let slot = st.slot(&id)?;
    if op == "preview" {
        let ticket = slot.preview_seq.fetch_add(1, Ordering::SeqCst) + 1;
        let mut s = slot.session.lock().await;
        if slot.preview_seq.load(Ordering::SeqCst) != ticket {
            return Err(ApiError::new(409, "superseded", "a newer preview request replaced this one"));
        }
        return apply(&mut s, &op, &a).map(Json);
    }
    let mut s = slot.session.lock().await;
    apply(&mut s, &op, &a).map(Json)
}

async fn status(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = st.slot(&id)?;
    let mut s = slot.session.lock().await;
    apply(&mut s, "status", &Value::Null).map(Json)
}

#[derive(Deserialize)]
struct SliceQuery {
    axis: Axis,
    index: Option<usize>,
    from: Option<usize>,
    to: Option<usize>,
    lo: Option<f64>,
    hi: Option<f64>,
}

impl SliceQuery {
    fn window(&self) -> Window {
        let d = Window::default();
        Window { lo: self.lo.unwrap_or(d.lo), hi: self.hi.unwrap_or(d.hi) }
    }
}

fn image_json(img: crate::slice::Image) -> Value {
    json!({
        "width": img.width,
        "height": img.height,
        "encoding": "base64",
        "pixels": base64::engine::general_purpose::STANDARD.encode(&img.pixels),
    })
}

async fn get_slice(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<SliceQuery>,
) -> Result<Json<Value>, ApiError> {
    let slot = st.slot(&id)?;
    let index = q.index.ok_or_else(|| ApiError::bad_request("index is required"))?;
    Ok(Json(image_json(project(&slot.dataset.display, q.axis, index, index, &q.window())?)))
}

async fn get_mip(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<SliceQuery>,
) -> Result<Json<Value>, ApiError> {
    let slot = st.slot(&id)?;
    let len = slot.dataset.display.dims()[q.axis.index()];
    let (from, to) = (q.from.unwrap_or(0), q.to.unwrap_or(len - 1));
    Ok(Json(image_json(project(&slot.dataset.display, q.axis, from, to, &q.window())?)))
}

async fn get_graph(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = st.slot(&id)?;
    let g = slot.dataset.context.graph();
    let nodes: Vec<Value> = g.nodes().iter().map(|n| json!({ "kind": n.kind, "voxel": n.position, "value": n.value })).collect();
    let arcs: Vec<Value> = g
        .arcs()
        .iter()
        .enumerate()
        .map(|(i, a)| json!({ "id": i, "ends": a.ends, "voxel": a.points }))
        .collect();
    Ok(Json(json!({ "dims": g.dims(), "spacing": g.spacing(), "nodes": nodes, "arcs": arcs })))
}

async fn get_swc(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slot = st.slot(&id)?;
    let s = slot.session.lock().await;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], export_swc(s.reconstruction())).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "ok": true })) }))
        .route("/sessions", post(open_session))
        .route("/sessions/{id}", get(status).delete(close_session))
        .route("/sessions/{id}/slice", get(get_slice))
        .route("/sessions/{id}/mip", get(get_mip))
        .route("/sessions/{id}/graph", get(get_graph))
        .route("/sessions/{id}/swc", get(get_swc))
        .route("/sessions/{id}/{op}", post(run_op))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
