//! HTTP ingestion and query service.
//!
//! Writes go through the store's write lock one at a time; reads hold the
//! read lock for the whole response, so they never observe a half-applied
//! batch.

use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ratbench_core::sim::{compare_policies, Comparison};
use ratbench_core::{Models, Policy, PolicyError, Scenario, SimError, Technology, WorkloadSpec};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

use crate::query::{
    aggregate_table, export_series, speed_series, AggregateOptions, FilterExpr, QueryError, SpeedPoint,
};
use crate::store::{IngestError, Ingested, RecordStore};

pub struct AppState {
    pub store: RwLock<RecordStore>,
    pub models: Models,
}

pub type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/health", get(|| async { Json(serde_json::json!({"status": "ok"})) }))
        .route("/v1/records", post(post_records).get(get_records))
        .route("/v1/aggregate", get(get_aggregate))
        .route("/v1/series", get(get_series))
        .route("/v1/whatif", post(post_whatif))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    status: StatusCode,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl ToString) -> Self {
        ApiError { code: code.to_string(), message: message.to_string(), status }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let code = match e.root() {
            IngestError::Parse(_) => "parse_error",
            IngestError::Validation(_) => "validation_error",
            IngestError::Io(_) => return ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", e),
            IngestError::AtLine { .. } => unreachable!("root strips line context"),
        };
        let status = if code == "parse_error" { StatusCode::BAD_REQUEST } else { StatusCode::UNPROCESSABLE_ENTITY };
        ApiError::new(status, code, e)
    }
}

fn params<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_parameter", e.body_text()))
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let code = match e {
            QueryError::BadRange(_) => "bad_range",
            QueryError::UnknownField(_) => "unknown_field",
        };
        ApiError::new(StatusCode::BAD_REQUEST, code, e)
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        let code = match &e {
            SimError::Policy { source: PolicyError::NoFeasibleTechnology { .. }, .. } => "no_feasible_technology",
            SimError::Policy { .. } | SimError::ConfigInvalid(_) => "invalid_request",
            SimError::Model(_) => "model_error",
            SimError::Record(_) => "validation_error",
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e)
    }
}

#[derive(Debug, Serialize)]
struct IngestResponse {
    ids: Vec<String>,
    created: usize,
}

/// Accepts one JSON record or a JSON Lines batch.
async fn post_records(State(s): State<Shared>, body: String) -> Result<Json<IngestResponse>, ApiError> {
    let mut store = s.store.write().await;
    let done: Vec<Ingested> = store.ingest_batch(&body)?;
    if done.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "parse_error", "request body holds no record"));
    }
    let created = done.iter().filter(|d| d.created).count();
    Ok(Json(IngestResponse { ids: done.into_iter().map(|d| d.record_id).collect(), created }))
}

/// Query-string form of [`FilterExpr`].
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    tech: Option<String>,
    scenario: Option<String>,
    from: Option<i64>,
    to: Option<i64>,
    min_payload: Option<u32>,
    max_payload: Option<u32>,
    min_speed: Option<f64>,
    max_speed: Option<f64>,
    delivered: Option<bool>,
}

impl FilterParams {
    fn to_filter(&self) -> Result<FilterExpr, ApiError> {
        let bad =
            |what: &str, v: &str| ApiError::new(StatusCode::BAD_REQUEST, "bad_parameter", format!("{what} {v:?}"));
        let technology = match &self.tech {
            Some(t) => Some(Technology::parse(t).ok_or_else(|| bad("unknown technology", t))?),
            None => None,
        };
        let scenario = match &self.scenario {
            Some(v) => Some(Scenario::parse(v).ok_or_else(|| bad("unknown scenario", v))?),
            None => None,
        };
        let f = FilterExpr {
            technology,
            scenario,
            min_payload: self.min_payload,
            max_payload: self.max_payload,
            min_speed: self.min_speed,
            max_speed: self.max_speed,
            from_ms: self.from,
            to_ms: self.to,
            delivered: self.delivered,
        };
        f.validate()?;
        Ok(f)
    }
}

async fn get_records(
    State(s): State<Shared>,
    p: Result<Query<FilterParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let filter = params(p)?.to_filter()?;
    let store = s.store.read().await;
    let mut body = Vec::new();
    for r in store.query(&filter) {
        serde_json::to_writer(&mut body, r).expect("record serializes");
        body.push(b'\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

#[derive(Debug, Deserialize)]
struct AggregateParams {
    #[serde(default = "table")]
    group: String,
    #[serde(default)]
    delivered_only: bool,
    min_samples: Option<u64>,
}

fn table() -> String {
    "table".into()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpeedSeries {
    pub technology: Technology,
    pub points: Vec<SpeedPoint>,
}

// Filter fields are read by a second extractor: flattening them would lose
// the numeric parsing of the query-string deserializer.
async fn get_aggregate(
    State(s): State<Shared>,
    p: Result<Query<AggregateParams>, QueryRejection>,
    f: Result<Query<FilterParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let (p, filter) = (params(p)?, params(f)?.to_filter()?);
    let store = s.store.read().await;
    match p.group.as_str() {
        "table" => {
            let mut opts = AggregateOptions { delivered_only: p.delivered_only, ..Default::default() };
            if let Some(m) = p.min_samples {
                opts.min_samples = m;
            }
            Ok(Json(aggregate_table(store.records(), &filter, opts)).into_response())
        }
        "speed" => {
            let techs = filter.technology.map_or(Technology::ALL.to_vec(), |t| vec![t]);
            let out: Vec<SpeedSeries> = techs
                .into_iter()
                .map(|t| SpeedSeries { technology: t, points: speed_series(store.query(&filter), t, &filter) })
                .collect();
            Ok(Json(out).into_response())
        }
        g => Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_parameter", format!("unknown group {g:?}"))),
    }
}

#[derive(Debug, Deserialize)]
struct SeriesParams {
    x: String,
    y: String,
}

async fn get_series(
    State(s): State<Shared>,
    p: Result<Query<SeriesParams>, QueryRejection>,
    f: Result<Query<FilterParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let (p, filter) = (params(p)?, params(f)?.to_filter()?);
    let store = s.store.read().await;
    Ok(Json(export_series(store.records(), &p.x, &p.y, &filter)?).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub workload: WorkloadSpec,
    pub policy_a: Policy,
    pub policy_b: Policy,
    #[serde(default)]
    pub seed: u64,
}

async fn post_whatif(State(s): State<Shared>, body: String) -> Result<Json<Comparison>, ApiError> {
    let req: WhatIfRequest =
        serde_json::from_str(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "parse_error", e))?;
    for p in [&req.policy_a, &req.policy_b] {
        p.validate().map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", e))?;
    }
    let models = s.models.clone();
    // CPU-bound; keep it off the async workers.
    let out = tokio::task::spawn_blocking(move || {
        compare_policies(&req.workload, &req.policy_a, &req.policy_b, &models, req.seed)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))??;
    Ok(Json(out))
}

pub async fn serve(addr: &str, store: RecordStore, models: Models) -> anyhow::Result<()> {
    let state = Arc::new(AppState { store: RwLock::new(store), models });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
