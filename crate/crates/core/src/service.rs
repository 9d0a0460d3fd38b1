//! HTTP service behind the point-annotation UI.
//!
//! Serves dataset images and edge maps, computes live pseudo-label previews
//! and persists annotations with optimistic versioning.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::config::PipelineConfig;
use crate::error::Error;
use crate::floodfill::{Nudge, PointAnnotation};
use crate::imaging::Point;
use crate::io::{self, AnnotationFile};
use crate::pipeline::pseudo_label_from_edges;

/// Largest image side accepted for previews.
pub const MAX_PREVIEW_SIDE: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationStatus {
    Unlabeled,
    InProgress,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSession {
    pub image_id: String,
    pub foreground_points: Vec<Point>,
    pub background_point: Option<Point>,
    pub version: u64,
    pub status: AnnotationStatus,
}

#[derive(Debug)]
struct Store {
    file: AnnotationFile,
    sessions: BTreeMap<String, AnnotationSession>,
}

/// Shared state of a running service.
#[derive(Debug)]
pub struct ServiceState {
    images_dir: PathBuf,
    edges_dir: PathBuf,
    annotations_path: PathBuf,
    config: PipelineConfig,
    store: Mutex<Store>,
}

impl ServiceState {
    /// Loads existing annotations (if the file exists); each loaded entry
    /// starts at version 1.
    pub fn new(images_dir: &Path, edges_dir: &Path, annotations_path: &Path, config: PipelineConfig) -> crate::Result<Self> {
        let file = if annotations_path.exists() {
            AnnotationFile::load(annotations_path)?
        } else {
            AnnotationFile::default()
        };
        let sessions = file
            .images
            .iter()
            .map(|a| {
                let s = AnnotationSession {
                    image_id: a.image_id.clone(),
                    foreground_points: a.foreground_points.clone(),
                    background_point: Some(a.background_point),
                    version: 1,
                    status: AnnotationStatus::Done,
                };
                (a.image_id.clone(), s)
            })
            .collect();
        Ok(ServiceState {
            images_dir: images_dir.to_path_buf(),
            edges_dir: edges_dir.to_path_buf(),
            annotations_path: annotations_path.to_path_buf(),
            config,
            store: Mutex::new(Store { file, sessions }),
        })
    }

    fn image_path(&self, id: &str) -> Option<PathBuf> {
        if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
            return None;
        }
        let p = self.images_dir.join(format!("{id}.png"));
        p.is_file().then_some(p)
    }

    fn edges_path(&self, id: &str) -> PathBuf {
        self.edges_dir.join(format!("{id}.png"))
    }
}

/// JSON error body with a status code.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, reason: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "reason": reason, "error": message.into() }),
        }
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown-image", format!("no image with id '{id}'"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub status: AnnotationStatus,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct PreviewRequest {
    pub foreground_points: Vec<Point>,
    #[serde(default)]
    pub background_point: Option<Point>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct PreviewResponse {
    /// Base64 PNG, identical to the batch pseudo-label file.
    pub trimap: String,
    pub radius: f64,
    pub dropped_seeds: Vec<Point>,
    pub nudged_seeds: Vec<Nudge>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct SaveRequest {
    pub foreground_points: Vec<Point>,
    #[serde(default)]
    pub background_point: Option<Point>,
    pub expected_version: u64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct SaveResponse {
    pub version: u64,
    pub status: AnnotationStatus,
}

fn dims_of(path: &Path) -> ApiResult<(usize, usize)> {
    image::image_dimensions(path)
        .map(|(w, h)| (w as usize, h as usize))
        .map_err(ApiError::internal)
}

fn check_points(fg: &[Point], bg: Option<Point>, w: usize, h: usize) -> ApiResult<()> {
    if fg.is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid-points",
            "at least one foreground point is required",
        ));
    }
    let named = fg
        .iter()
        .enumerate()
        .map(|(i, p)| (format!("foreground_points[{i}]"), *p))
        .chain(bg.map(|p| ("background_point".to_string(), p)));
    for (name, p) in named {
        if p.x >= w || p.y >= h {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "out-of-bounds",
                format!("{name} = ({}, {}) is outside the {w}x{h} image", p.x, p.y),
            ));
        }
    }
    Ok(())
}

async fn list_images(State(state): State<Arc<ServiceState>>) -> ApiResult<Json<Vec<ImageEntry>>> {
    let files = io::list_pngs(&state.images_dir).map_err(ApiError::internal)?;
    let store = state.store.lock().await;
    let mut out = Vec::with_capacity(files.len());
    for (id, path) in files {
        let (width, height) = dims_of(&path)?;
        let status = store
            .sessions
            .get(&id)
            .map_or(AnnotationStatus::Unlabeled, |s| s.status);
        out.push(ImageEntry { id, width, height, status });
    }
    Ok(Json(out))
}

fn png_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn image_file(State(state): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let path = state.image_path(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let bytes = tokio::fs::read(&path).await.map_err(ApiError::internal)?;
    Ok(png_response(bytes))
}

async fn edge_file(State(state): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    state.image_path(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let path = state.edges_path(&id);
    if !path.is_file() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "missing-edges",
            format!("no edge map for '{id}'; run `pointsal demo-edges` or provide {}", path.display()),
        ));
    }
    let bytes = tokio::fs::read(&path).await.map_err(ApiError::internal)?;
    Ok(png_response(bytes))
}

async fn preview(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<PreviewRequest>,
) -> ApiResult<Json<PreviewResponse>> {
    let path = state.image_path(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let (w, h) = dims_of(&path)?;
    if w > MAX_PREVIEW_SIDE || h > MAX_PREVIEW_SIDE {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "too-large",
            format!("{w}x{h} exceeds the {MAX_PREVIEW_SIDE}px preview limit"),
        ));
    }
    check_points(&req.foreground_points, req.background_point, w, h)?;
    let edges_path = state.edges_path(&id);
    if !edges_path.is_file() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "missing-edges",
            format!("no edge map for '{id}'"),
        ));
    }
    let mut config = state.config.clone();
    if let Some(g) = req.gamma {
        config.mask.gamma = g;
    }
    let result = tokio::task::spawn_blocking(move || {
        let edges = io::read_gray8(&edges_path)?;
        if (edges.width() as usize, edges.height() as usize) != (w, h) {
            return Err(Error::DimensionMismatch {
                expected: (w, h),
                actual: (edges.width() as usize, edges.height() as usize),
            });
        }
        pseudo_label_from_edges(&edges, &req.foreground_points, req.background_point, &config)
    })
    .await
    .map_err(ApiError::internal)?;
    match result {
        Ok(label) => Ok(Json(PreviewResponse {
            trimap: base64::engine::general_purpose::STANDARD.encode(io::encode_trimap_png(&label.trimap)),
            radius: label.radius,
            dropped_seeds: label.dropped_seeds,
            nudged_seeds: label.nudged,
        })),
        Err(Error::EmptyFill(p)) => Err(ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({
                "reason": "empty-fill",
                "error": format!("point ({}, {}) lies on an edge with no free pixel nearby", p.x, p.y),
                "point": p,
            }),
        }),
        Err(e @ Error::DimensionMismatch { .. }) => Err(ApiError::new(StatusCode::CONFLICT, "edge-dims", e.to_string())),
        Err(e @ Error::InvalidArgument(_)) => {
            Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-argument", e.to_string()))
        }
        Err(e) => Err(ApiError::internal(e)),
    }
}

async fn get_annotation(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<AnnotationSession>> {
    state.image_path(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let store = state.store.lock().await;
    let session = store.sessions.get(&id).cloned().unwrap_or(AnnotationSession {
        image_id: id,
        foreground_points: Vec::new(),
        background_point: None,
        version: 0,
        status: AnnotationStatus::Unlabeled,
    });
    Ok(Json(session))
}

async fn put_annotation(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<SaveRequest>,
) -> ApiResult<Json<SaveResponse>> {
    let path = state.image_path(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let (w, h) = dims_of(&path)?;
    check_points(&req.foreground_points, req.background_point, w, h)?;
    if let Some(b) = req.background_point {
        if req.foreground_points.contains(&b) {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid-points",
                "background_point coincides with a foreground point",
            ));
        }
    }

    let mut store = state.store.lock().await;
    let current = store.sessions.get(&id).map_or(0, |s| s.version);
    if req.expected_version != current {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            body: json!({
                "reason": "version-conflict",
                "error": format!("expected version {} but the stored version is {current}", req.expected_version),
                "current_version": current,
            }),
        });
    }
    let status = match req.background_point {
        Some(background_point) => {
            let mut file = store.file.clone();
            file.upsert(PointAnnotation {
                image_id: id.clone(),
                width: w,
                height: h,
                foreground_points: req.foreground_points.clone(),
                background_point,
            });
            file.save_atomic(&state.annotations_path).map_err(ApiError::internal)?;
            store.file = file;
            AnnotationStatus::Done
        }
        // incomplete annotations are kept in memory only
        None => AnnotationStatus::InProgress,
    };
    let version = current + 1;
    store.sessions.insert(
        id.clone(),
        AnnotationSession {
            image_id: id,
            foreground_points: req.foreground_points,
            background_point: req.background_point,
            version,
            status,
        },
    );
    Ok(Json(SaveResponse { version, status }))
}

const FALLBACK_INDEX: &str = "<!doctype html><title>pointsal</title>\
<p>Annotation API is running. Start the server with <code>--ui-dir</code> to serve the annotation UI.</p>";

/// Builds the router. When `ui_dir` is given its files are served at `/`.
pub fn router(state: Arc<ServiceState>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/images", get(list_images))
        .route("/api/images/{id}/file", get(image_file))
        .route("/api/images/{id}/edges", get(edge_file))
        .route("/api/images/{id}/preview", post(preview))
        .route("/api/images/{id}/annotation", get(get_annotation).put(put_annotation))
        .with_state(state);
    let app = match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { axum::response::Html(FALLBACK_INDEX) })),
    };
    app.layer(CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any))
}

/// Binds and serves until the process is stopped.
pub async fn serve(state: Arc<ServiceState>, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let app = router(state, ui_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await
}
