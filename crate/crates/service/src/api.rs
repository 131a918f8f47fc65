use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::Utc;
use serde::Serialize;
use serde_json::json;
use sortie_core::render::{export_json, render_altitude, render_topdown, PlotSpec};

use crate::journal::LabelFilter;
use crate::labels::{check_label, LabelKind, LabelProblem, LabelRecord, NewLabel};
use crate::state::{Analysis, AppState};

pub const LABELER_HEADER: &str = "x-labeler-id";

/// Error body: `{"error": kind, "detail": text}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, detail: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            detail: detail.into(),
        }
    }

    fn unknown_sortie(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownSortie", format!("no sortie `{id}`"))
    }

    fn malformed(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "MalformedRecord", detail)
    }

    fn internal(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.kind, "detail": self.detail}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking work (file parsing, analysis, fsync) off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn analysis(state: &AppState, id: &str) -> ApiResult<Arc<Analysis>> {
    state
        .analysis(id)
        .ok_or_else(|| ApiError::unknown_sortie(id))?
        .map_err(ApiError::internal)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sorties", get(list_sorties))
        .route("/sorties/{id}/trajectory", get(trajectory))
        .route("/sorties/{id}/render/topdown", get(topdown))
        .route("/sorties/{id}/render/altitude", get(altitude))
        .route("/sorties/{id}/auto", get(auto))
        .route("/sorties/{id}/labels", axum::routing::post(post_label))
        .route("/labels", get(list_labels))
        .with_state(state)
}

async fn list_sorties(State(st): State<Arc<AppState>>) -> ApiResult<Response> {
    blocking(move || {
        let mut out = Vec::new();
        for id in st.sortie_ids() {
            // unreadable files are left out of the listing, not fatal
            if let Some(Ok(s)) = st.summary(id) {
                out.push(s);
            }
        }
        Ok(Json(out).into_response())
    })
    .await
}

async fn trajectory(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    blocking(move || {
        let a = analysis(&st, &id)?;
        Ok(([(header::CONTENT_TYPE, "application/json")], export_json(&a.trajectory)).into_response())
    })
    .await
}

fn plot_spec(q: &HashMap<String, String>) -> ApiResult<PlotSpec> {
    let d = PlotSpec::default();
    fn num<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str, default: T) -> ApiResult<T> {
        match q.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ApiError::malformed(format!("bad {key} `{v}`"))),
        }
    }
    PlotSpec::new(
        num(q, "width", d.width())?,
        num(q, "height", d.height())?,
        num(q, "margin", d.margin())?,
        num(q, "stroke_width", d.stroke_width())?,
        num(q, "decimation", d.decimation())?,
    )
    .map_err(|e| ApiError::malformed(e.to_string()))
}

fn svg(body: String) -> Response {
    ([(header::CONTENT_TYPE, "image/svg+xml")], body).into_response()
}

async fn topdown(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let spec = plot_spec(&q)?;
    blocking(move || Ok(svg(render_topdown(&analysis(&st, &id)?.trajectory, &spec)))).await
}

async fn altitude(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let spec = plot_spec(&q)?;
    blocking(move || Ok(svg(render_altitude(&analysis(&st, &id)?.trajectory, &spec)))).await
}

async fn auto(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    blocking(move || {
        let a = st
            .auto(&id)
            .ok_or_else(|| ApiError::unknown_sortie(&id))?
            .map_err(ApiError::internal)?;
        Ok(Json(a).into_response())
    })
    .await
}

#[derive(Serialize)]
struct Created {
    record_id: String,
}

async fn post_label(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    if !st.contains(&id) {
        return Err(ApiError::unknown_sortie(&id));
    }
    let label: NewLabel = serde_json::from_slice(&body).map_err(|e| ApiError::malformed(e.to_string()))?;
    let header_labeler = match headers.get(LABELER_HEADER) {
        Some(v) => Some(
            v.to_str()
                .map_err(|_| ApiError::malformed("labeler header is not text"))?
                .to_string(),
        ),
        None => None,
    };
    blocking(move || {
        let a = analysis(&st, &id)?;
        let span = (a.trajectory.t_first(), a.trajectory.t_last());
        let labeler_id = check_label(&label, header_labeler.as_deref(), span).map_err(|p| match p {
            LabelProblem::Malformed(d) => ApiError::malformed(d),
            LabelProblem::Interval(d) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidInterval", d),
        })?;
        let stored = st
            .journal
            .append(LabelRecord {
                record_id: String::new(),
                sortie_id: id,
                label_kind: label.label_kind,
                value: label.value,
                t_start: label.t_start,
                t_end: label.t_end,
                labeler_id,
                created_at: Utc::now(),
            })
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok((StatusCode::CREATED, Json(Created { record_id: stored.record_id })).into_response())
    })
    .await
}

async fn list_labels(State(st): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Response> {
    // an empty parameter means no filter on that field
    let get = |k: &str| q.get(k).filter(|v| !v.is_empty()).cloned();
    if let Some(k) = q.keys().find(|k| !matches!(k.as_str(), "sortie_id" | "label_kind" | "labeler_id")) {
        return Err(ApiError::malformed(format!("unknown filter `{k}`")));
    }
    let label_kind = match get("label_kind") {
        Some(k) => Some(k.parse::<LabelKind>().map_err(ApiError::malformed)?),
        None => None,
    };
    let filter = LabelFilter {
        sortie_id: get("sortie_id"),
        label_kind,
        labeler_id: get("labeler_id"),
    };
    Ok(Json(st.journal.export(&filter)).into_response())
}
