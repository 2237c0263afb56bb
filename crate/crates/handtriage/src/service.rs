//! JSON API over the run store for the review UI and scripts.
//!
//! Thresholds are query parameters and never modify a stored run; only
//! verdicts are written, one at a time.

use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use handtriage_core::triage::{
    export_report, rethreshold, FrameVerdict, TriageError, TriageOptions, TriageRun, Verdict,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use crate::error::Error;
use crate::store::RunStore;
use crate::triage::{frame_path, report_csv, triage_from_paths, TriageRequest};

pub const DEFAULT_PAGE_SIZE: usize = 50;
const MAX_PAGE_SIZE: usize = 1000;

#[derive(Clone)]
pub struct AppState {
    store: RunStore,
    read_only: bool,
    writes: Arc<Mutex<()>>,
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
    pub read_only: bool,
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::RunNotFound(_) | Error::FrameNotFound { .. } => StatusCode::NOT_FOUND,
            Error::Triage(TriageError::StaleRevision { .. }) => StatusCode::CONFLICT,
            Error::Triage(_) | Error::Invalid(_) | Error::Format { .. } | Error::ImageSize { .. } => {
                StatusCode::BAD_REQUEST
            }
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl From<TriageError> for ApiError {
    fn from(e: TriageError) -> Self {
        Error::from(e).into()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn read_only_error() -> ApiError {
    ApiError(StatusCode::FORBIDDEN, "service is read-only".into())
}

pub fn router(data_dir: &FsPath, read_only: bool) -> crate::error::Result<Router> {
    let state = AppState {
        store: RunStore::open(data_dir)?,
        read_only,
        writes: Arc::new(Mutex::new(())),
    };
    Ok(Router::new()
        .route("/api/runs", get(list_runs).post(create_run))
        .route("/api/runs/{id}/summary", get(summary))
        .route("/api/runs/{id}/frames", get(frames))
        .route("/api/runs/{id}/frames/{frame}/verdict", post(post_verdict))
        .route("/api/runs/{id}/export", get(export))
        .route("/api/frames/{run}/{frame}/image", get(frame_image))
        .with_state(state))
}

/// Binds and serves until Ctrl-C; in-flight requests finish first.
pub async fn serve(cfg: ServeConfig) -> crate::error::Result<()> {
    let app = router(&cfg.data_dir, cfg.read_only)?;
    let listener = tokio::net::TcpListener::bind(cfg.addr)
        .await
        .map_err(|e| Error::Invalid(format!("cannot listen on {}: {e}", cfg.addr)))?;
    eprintln!("listening on http://{}", cfg.addr);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Invalid(format!("server error: {e}")))
}

async fn list_runs(State(st): State<AppState>) -> ApiResult<Json<Vec<crate::store::RunListing>>> {
    Ok(Json(st.store.list()?))
}

#[derive(Debug, Deserialize)]
struct CreateRun {
    frames_dir: PathBuf,
    detections_path: PathBuf,
    threshold: f64,
    #[serde(default)]
    min_confidence: f64,
    #[serde(default)]
    normalized: bool,
}

async fn create_run(State(st): State<AppState>, Json(body): Json<CreateRun>) -> ApiResult<impl IntoResponse> {
    if st.read_only {
        return Err(read_only_error());
    }
    let run_id = uuid::Uuid::new_v4().simple().to_string();
    let created_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let store = st.store.clone();
    let id = run_id.clone();
    tokio::task::spawn_blocking(move || {
        let run = triage_from_paths(&TriageRequest {
            frames_dir: &body.frames_dir,
            detections: &body.detections_path,
            threshold: body.threshold,
            options: TriageOptions {
                min_confidence: body.min_confidence,
                normalized: body.normalized,
            },
            run_id: id,
            created_at,
        })?;
        store.save(&run)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(json!({ "run_id": run_id }))))
}

#[derive(Debug, Deserialize)]
struct ThresholdQuery {
    threshold: Option<f64>,
}

async fn summary(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ThresholdQuery>,
) -> ApiResult<Json<serde_json::Value>> {
    let run = st.store.load(&id)?;
    let r = rethreshold(&run, q.threshold.unwrap_or(run.threshold))?;
    Ok(Json(
        json!({ "flagged": r.flagged, "total": r.total, "threshold": r.threshold }),
    ))
}

#[derive(Debug, Deserialize)]
struct FramesQuery {
    threshold: Option<f64>,
    page: Option<usize>,
    size: Option<usize>,
}

#[derive(Debug, Serialize)]
struct DetectionView {
    /// Absolute `[x, y, w, h]`.
    bbox: [f64; 4],
    confidence: f64,
}

#[derive(Debug, Serialize)]
struct FrameView {
    frame_id: String,
    area_px2: f64,
    flagged: bool,
    verdict: Verdict,
    note: String,
    revision: u64,
    width: Option<u32>,
    height: Option<u32>,
    detections: Vec<DetectionView>,
}

#[derive(Debug, Serialize)]
struct FramesPage {
    threshold: f64,
    page: usize,
    size: usize,
    total: usize,
    flagged: usize,
    frames: Vec<FrameView>,
}

/// Pages are 0-based over the area ranking.
async fn frames(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FramesQuery>,
) -> ApiResult<Json<FramesPage>> {
    let run = st.store.load(&id)?;
    let ledger = st.store.verdicts(&id)?;
    let threshold = q.threshold.unwrap_or(run.threshold);
    let summary = rethreshold(&run, threshold)?;
    let size = q.size.unwrap_or(DEFAULT_PAGE_SIZE).clamp(1, MAX_PAGE_SIZE);
    let page = q.page.unwrap_or(0);
    let frames = run
        .frames
        .iter()
        .skip(page.saturating_mul(size))
        .take(size)
        .map(|f| {
            let v = ledger.get(&f.frame_id);
            FrameView {
                frame_id: f.frame_id.clone(),
                area_px2: f.largest_area,
                flagged: f.largest_area > threshold,
                verdict: v.map_or(Verdict::Unreviewed, |v| v.verdict),
                note: v.map_or_else(String::new, |v| v.note.clone()),
                revision: v.map_or(0, |v| v.revision),
                width: f.size.map(|s| s.width),
                height: f.size.map(|s| s.height),
                detections: f
                    .detections
                    .iter()
                    .map(|d| DetectionView {
                        bbox: d.bbox.to_xywh(),
                        confidence: d.confidence,
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(Json(FramesPage {
        threshold,
        page,
        size,
        total: summary.total,
        flagged: summary.flagged,
        frames,
    }))
}

fn require_frame(run: &TriageRun, frame: &str) -> Result<(), Error> {
    match run.frame(frame) {
        Some(_) => Ok(()),
        None => Err(Error::FrameNotFound {
            run: run.meta.run_id.clone(),
            frame: frame.to_string(),
        }),
    }
}

fn content_type(path: &FsPath) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("bmp") => "image/bmp",
        Some("webp") => "image/webp",
        Some("tif" | "tiff") => "image/tiff",
        _ => "application/octet-stream",
    }
}

async fn frame_image(State(st): State<AppState>, Path((run_id, frame)): Path<(String, String)>) -> ApiResult<Response> {
    let run = st.store.load(&run_id)?;
    require_frame(&run, &frame)?;
    let not_found = || Error::FrameNotFound {
        run: run_id.clone(),
        frame: frame.clone(),
    };
    let path = frame_path(FsPath::new(&run.meta.frames_dir), &frame)?.ok_or_else(not_found)?;
    let bytes = tokio::fs::read(&path).await.map_err(|_| not_found())?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

#[derive(Debug, Deserialize)]
struct VerdictBody {
    verdict: Verdict,
    #[serde(default)]
    note: String,
    /// Revision the client last saw; 0 for a frame never marked.
    revision: u64,
}

async fn post_verdict(
    State(st): State<AppState>,
    Path((run_id, frame)): Path<(String, String)>,
    Json(body): Json<VerdictBody>,
) -> ApiResult<Json<FrameVerdict>> {
    if st.read_only {
        return Err(read_only_error());
    }
    let _guard = st.writes.lock().await;
    let run = st.store.load(&run_id)?;
    require_frame(&run, &frame)?;
    let mut ledger = st.store.verdicts(&run_id)?;
    let entry = ledger.apply(&frame, body.verdict, body.note, body.revision)?;
    st.store.append_verdict(&run_id, &entry)?;
    Ok(Json(entry))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let run = st.store.load(&id)?;
    let report = export_report(&run, &st.store.verdicts(&id)?);
    let attachment = |ext: &str| format!("attachment; filename=\"triage-{id}.{ext}\"");
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok(([(header::CONTENT_DISPOSITION, attachment("json"))], Json(report)).into_response()),
        "csv" => Ok((
            [
                (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
                (header::CONTENT_DISPOSITION, attachment("csv")),
            ],
            report_csv(&report)?,
        )
            .into_response()),
        other => Err(ApiError(
            StatusCode::BAD_REQUEST,
            format!("unknown export format {other:?}; expected json or csv"),
        )),
    }
}
