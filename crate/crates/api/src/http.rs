//! HTTP JSON API. The only mutating routes are command submission and
//! confirmation; everything else is read-only.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fermtwin_core::domain::{
    CommandId, CommandKind, Confirmation, SafetyLevel, WallMs, MAX_SAMPLING_INTERVAL,
    MIN_SAMPLING_INTERVAL, SG_RANGE,
};
use fermtwin_core::server::{
    AnalysisError, CommandError, CommandStatus, Metric, Resolution, SeriesData, ServerError,
    StoreError, TwinServer, PENDING_WINDOW,
};
use fermtwin_core::{BatchId, PressureBar};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::clock::Clock;
use crate::live;

#[derive(Clone)]
pub struct AppState {
    pub server: Arc<TwinServer>,
    pub clock: Clock,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/limits", get(limits))
        .route("/controller", get(controller))
        .route("/batches", get(batches))
        .route("/batches/{id}/series", get(series))
        .route("/batches/{id}/metrics", get(metrics))
        .route("/alerts", get(alerts))
        .route("/commands", get(commands).post(submit))
        .route("/commands/{id}", get(command))
        .route("/commands/{id}/confirm", post(confirm))
        .route("/live", get(live::upgrade))
        .with_state(state)
}

/// JSON error body: `{"error": code, "detail": message}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            code,
            detail: detail.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "detail": self.detail }))).into_response()
    }
}

impl From<ServerError> for ApiError {
    fn from(e: ServerError) -> Self {
        let detail = e.to_string();
        match e {
            ServerError::UnknownBatch(_) => Self::new(StatusCode::NOT_FOUND, "unknown_batch", detail),
            ServerError::Store(StoreError::Io(_)) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "store", detail)
            }
            ServerError::Store(_) => Self::new(StatusCode::BAD_REQUEST, "bad_query", detail),
            ServerError::Analysis(AnalysisError::InsufficientData(_)) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data", detail)
            }
            ServerError::Command(CommandError::UnknownCommand(_)) => {
                Self::new(StatusCode::NOT_FOUND, "unknown_command", detail)
            }
            ServerError::Command(CommandError::NotPending(_)) => {
                Self::new(StatusCode::CONFLICT, "not_pending", detail)
            }
            ServerError::Command(CommandError::Expired) => Self::new(StatusCode::GONE, "expired", detail),
            ServerError::Command(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "rejected", detail),
            ServerError::Alert(_) => Self::new(StatusCode::NOT_FOUND, "unknown_alert", detail),
        }
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandInfo {
    pub kind: String,
    pub level: SafetyLevel,
    pub remote_allowed: bool,
}

/// Bounds the dashboard mirrors for client-side validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub min_sampling_interval_ms: u64,
    pub max_sampling_interval_ms: u64,
    pub pressure_setpoint: PressureBar,
    pub shutdown_threshold: PressureBar,
    pub relief_threshold: PressureBar,
    pub burst_pressure: PressureBar,
    pub sg_range: (f64, f64),
    pub pending_window_ms: u64,
    pub commands: Vec<CommandInfo>,
}

fn command_catalog() -> Vec<CommandKind> {
    vec![
        CommandKind::SetSamplingInterval { interval_ms: 0 },
        CommandKind::RequestSampleCycle,
        CommandKind::PauseSampling,
        CommandKind::ResumeSampling,
        CommandKind::ManualDepressurize,
        CommandKind::OverridePressureLimit { limit: PressureBar(0.0) },
        CommandKind::EmergencyStop,
        CommandKind::ResetEmergencyShutdown,
    ]
}

async fn limits(State(app): State<AppState>) -> Json<Limits> {
    let cfg = app.server.config();
    Json(Limits {
        min_sampling_interval_ms: MIN_SAMPLING_INTERVAL.as_millis() as u64,
        max_sampling_interval_ms: MAX_SAMPLING_INTERVAL.as_millis() as u64,
        pressure_setpoint: cfg.pressure_setpoint,
        shutdown_threshold: cfg.safety.shutdown_threshold,
        relief_threshold: cfg.relief_threshold,
        burst_pressure: PressureBar::BURST,
        sg_range: SG_RANGE,
        pending_window_ms: PENDING_WINDOW.as_millis() as u64,
        commands: command_catalog()
            .into_iter()
            .map(|k| CommandInfo {
                kind: k.name().to_owned(),
                level: k.level(),
                remote_allowed: k.level() != SafetyLevel::Critical,
            })
            .collect(),
    })
}

async fn controller(State(app): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "controller": app.server.controller_view() }))
}

async fn batches(State(app): State<AppState>) -> impl IntoResponse {
    Json(app.server.batches())
}

#[derive(Debug, Deserialize)]
pub struct SeriesQuery {
    pub metric: String,
    pub from: Option<WallMs>,
    pub to: Option<WallMs>,
    pub resolution: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResponse {
    pub batch_id: BatchId,
    pub metric: Metric,
    pub from: WallMs,
    pub to: WallMs,
    pub count: usize,
    #[serde(flatten)]
    pub data: SeriesData,
}

async fn series(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SeriesQuery>,
) -> Result<Json<SeriesResponse>, ApiError> {
    let metric: Metric = q
        .metric
        .parse()
        .map_err(|e: fermtwin_core::server::UnknownMetric| {
            ApiError::new(StatusCode::BAD_REQUEST, "unknown_metric", e.to_string())
        })?;
    let resolution = match q.resolution.as_deref() {
        None => Resolution::Raw,
        Some(s) => Resolution::parse(s).ok_or_else(|| {
            ApiError::new(StatusCode::BAD_REQUEST, "bad_resolution", format!("unknown resolution {s:?}"))
        })?,
    };
    let from = q.from.unwrap_or(0);
    let to = q.to.unwrap_or(WallMs::MAX);
    if from >= to {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_range", "from must be before to"));
    }
    let batch_id = BatchId::new(id);
    let data = match app.server.query_range(&batch_id, metric, from, to, resolution) {
        Err(ServerError::Store(StoreError::UnknownMetric { .. } | StoreError::UnknownBatch(_))) => match resolution {
            Resolution::Raw => SeriesData::Raw(Vec::new()),
            _ => SeriesData::Rollup(Vec::new()),
        },
        r => r?,
    };
    Ok(Json(SeriesResponse {
        batch_id,
        metric,
        from,
        to,
        count: data.len(),
        data,
    }))
}

async fn metrics(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let server = Arc::clone(&app.server);
    let report = tokio::task::spawn_blocking(move || server.trend(&BatchId::new(id)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "analysis", e.to_string()))??;
    Ok(Json(report).into_response())
}

async fn alerts(State(app): State<AppState>) -> impl IntoResponse {
    Json(app.server.alerts())
}

async fn commands(State(app): State<AppState>) -> impl IntoResponse {
    Json(app.server.commands())
}

async fn command(State(app): State<AppState>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let record = app.server.command(CommandId(id)).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_command", format!("unknown command {id}"))
    })?;
    Ok(Json(record).into_response())
}

/// `{"kind": ..., "args": ..., "confirmations": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitCommand {
    #[serde(flatten)]
    pub kind: CommandKind,
    #[serde(default)]
    pub confirmations: BTreeSet<Confirmation>,
}

fn status_code(status: &CommandStatus) -> StatusCode {
    match status {
        CommandStatus::Dispatched | CommandStatus::Pending { .. } => StatusCode::ACCEPTED,
        CommandStatus::Rejected { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        CommandStatus::Expired => StatusCode::GONE,
        CommandStatus::Completed | CommandStatus::Failed { .. } => StatusCode::OK,
    }
}

async fn submit(State(app): State<AppState>, Json(body): Json<SubmitCommand>) -> Response {
    let record = app.server.submit_command(body.kind, body.confirmations, app.clock.now());
    (status_code(&record.status), Json(record)).into_response()
}

async fn confirm(State(app): State<AppState>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let record = app.server.confirm_command(CommandId(id), app.clock.now())?;
    Ok((status_code(&record.status), Json(record)).into_response())
}
