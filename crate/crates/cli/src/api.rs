//! JSON API over a report store. Every handler reads the store afresh; the
//! service holds no state beyond the store location.
//!
//! Scores cross the boundary as decimal strings (shortest round-trip form),
//! so clients that parse them back get the exact stored value.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use defi_rank_core::ahp::{self, ConsistencyReport, EigenResult, PairwiseMatrix};
use defi_rank_core::error::ahp_code;
use defi_rank_core::evaluator::MatrixReport;
use defi_rank_core::store::{what_if, ReportStore, RunManifest, WeightOverrides};
use defi_rank_core::{Criterion, EigenSettings, EvalError, Granularity};

use crate::commands::{resolve_run, series_table, Ordinate};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    status: u16,
}

impl ApiError {
    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), message: message.into(), status: 400 }
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        let status = match e {
            EvalError::UnknownRun(_) | EvalError::MissingGranularity { .. } => 404,
            EvalError::Corrupt(_) | EvalError::Io { .. } => 500,
            _ => 400,
        };
        Self { code: e.code().to_string(), message: e.to_string(), status }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn decimal(v: f64) -> String {
    v.to_string()
}

/// Parses a JSON body, reporting malformed payloads with our error shape
/// rather than the extractor's plain-text rejection.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("InvalidPayload", e.to_string()))
}

pub fn router(store: ReportStore) -> Router {
    Router::new()
        .route("/api/runs", get(list_runs))
        .route("/api/runs/{id}/scores", get(scores))
        .route("/api/runs/{id}/protocols", get(protocols))
        .route("/api/runs/{id}/whatif", post(whatif))
        .route("/api/consistency", post(consistency))
        .fallback(|| async { ApiError { code: "NotFound".into(), message: "no such endpoint".into(), status: 404 } })
        .with_state(Arc::new(store))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub created_at: String,
    pub config_hash: String,
    pub input_digests: BTreeMap<String, String>,
    pub granularities: Vec<GranularitySummary>,
    pub consistency_warning: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GranularitySummary {
    pub granularity: Granularity,
    pub dates: Vec<NaiveDate>,
    pub skipped: Vec<NaiveDate>,
}

impl From<&RunManifest> for RunSummary {
    fn from(m: &RunManifest) -> Self {
        Self {
            run_id: m.run_id.clone(),
            created_at: m.created_at.clone(),
            config_hash: m.config_hash.clone(),
            input_digests: m.input_digests.clone(),
            granularities: m
                .granularities
                .iter()
                .map(|g| GranularitySummary {
                    granularity: g.granularity,
                    dates: g.dates.clone(),
                    skipped: g.skipped.iter().map(|s| s.date).collect(),
                })
                .collect(),
            consistency_warning: defi_rank_core::evaluator::resolve_weights(&m.config.weights, m.config.eigen)
                .map(|w| w.matrices.iter().any(|r| !r.pass))
                .unwrap_or(false),
        }
    }
}

async fn list_runs(State(store): State<Arc<ReportStore>>) -> ApiResult<Vec<RunSummary>> {
    Ok(Json(store.list_runs()?.iter().map(RunSummary::from).collect()))
}

#[derive(Debug, Deserialize)]
pub struct ScoresQuery {
    granularity: Option<String>,
    ordinate: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesLine {
    pub protocol: String,
    /// Decimal score strings or integer ranks as strings; null where the
    /// protocol was not evaluated on that date.
    pub values: Vec<Option<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoresResponse {
    pub run_id: String,
    pub granularity: Granularity,
    pub ordinate: String,
    pub dates: Vec<NaiveDate>,
    pub series: Vec<SeriesLine>,
}

fn parse_granularity(s: Option<&str>) -> Result<Option<Granularity>, ApiError> {
    s.map(|s| s.parse().map_err(|e: String| ApiError::bad_request("InvalidGranularity", e))).transpose()
}

async fn scores(
    State(store): State<Arc<ReportStore>>,
    Path(id): Path<String>,
    Query(q): Query<ScoresQuery>,
) -> ApiResult<ScoresResponse> {
    let (ordinate, name) = match q.ordinate.as_deref() {
        None | Some("score") => (Ordinate::Score, "score"),
        Some("rank") => (Ordinate::Rank, "rank"),
        Some(other) => {
            return Err(ApiError::bad_request("InvalidOrdinate", format!("unknown ordinate {other:?} (score, rank)")))
        }
    };
    let (manifest, g) = resolve_run(&store, Some(&id), parse_granularity(q.granularity.as_deref())?)?;
    let records = store.records(&manifest.run_id, g)?;
    let (header, rows) = series_table(&records, ordinate, &[], None, None)?;
    let dates = rows.iter().map(|r| r[0].parse().expect("ISO date")).collect();
    let series = header[1..]
        .iter()
        .enumerate()
        .map(|(k, protocol)| SeriesLine {
            protocol: protocol.clone(),
            values: rows.iter().map(|r| Some(r[k + 1].clone()).filter(|s| !s.is_empty())).collect(),
        })
        .collect();
    Ok(Json(ScoresResponse { run_id: manifest.run_id, granularity: g, ordinate: name.into(), dates, series }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub protocol: String,
    /// Dates on which the protocol was ranked, per granularity.
    pub dates: BTreeMap<Granularity, usize>,
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
    pub flags: BTreeSet<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProtocolsResponse {
    pub run_id: String,
    pub protocols: Vec<ProtocolSummary>,
}

async fn protocols(State(store): State<Arc<ReportStore>>, Path(id): Path<String>) -> ApiResult<ProtocolsResponse> {
    let manifest = store.manifest(&id)?;
    let mut by_name: BTreeMap<String, ProtocolSummary> = BTreeMap::new();
    for run in &manifest.granularities {
        for r in store.records(&id, run.granularity)? {
            let entry = by_name.entry(r.protocol.clone()).or_insert_with(|| ProtocolSummary {
                protocol: r.protocol.clone(),
                dates: BTreeMap::new(),
                first_date: None,
                last_date: None,
                flags: BTreeSet::new(),
            });
            *entry.dates.entry(run.granularity).or_default() += 1;
            entry.first_date = Some(entry.first_date.map_or(r.date, |d| d.min(r.date)));
            entry.last_date = Some(entry.last_date.map_or(r.date, |d| d.max(r.date)));
            entry.flags.extend(r.flags.iter().map(|f| f.split(':').next().unwrap_or(f).to_string()));
        }
    }
    Ok(Json(ProtocolsResponse { run_id: manifest.run_id, protocols: by_name.into_values().collect() }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    #[serde(default)]
    pub granularity: Option<String>,
    #[serde(default)]
    pub weights: WeightOverrides,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub name: String,
    pub n: usize,
    pub lambda_max: f64,
    pub weights: Vec<f64>,
    pub ci: f64,
    pub ri: f64,
    pub cr: f64,
    pub pass: bool,
}

impl From<&MatrixReport> for MatrixSummary {
    fn from(m: &MatrixReport) -> Self {
        Self {
            name: m.name.clone(),
            n: m.n,
            lambda_max: m.lambda_max,
            weights: m.weights.clone(),
            ci: m.ci,
            ri: m.ri,
            cr: m.cr,
            pass: m.pass,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WhatIfRowOut {
    pub protocol: String,
    pub score: String,
    pub rank: usize,
    pub criteria: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WhatIfDateOut {
    pub date: NaiveDate,
    pub criterion_weights: BTreeMap<String, f64>,
    pub rows: Vec<WhatIfRowOut>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub run_id: String,
    pub granularity: Granularity,
    pub weight_matrices: Vec<MatrixSummary>,
    pub consistency_warning: bool,
    pub dates: Vec<WhatIfDateOut>,
}

fn criterion_map<T>(values: &[f64], f: impl Fn(f64) -> T) -> BTreeMap<String, T> {
    Criterion::ALL.iter().zip(values).map(|(c, v)| (c.as_str().to_string(), f(*v))).collect()
}

async fn whatif(
    State(store): State<Arc<ReportStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<WhatIfResponse> {
    let req: WhatIfRequest =
        if body.iter().all(u8::is_ascii_whitespace) { WhatIfRequest::default() } else { parse_body(&body)? };
    let (manifest, g) = resolve_run(&store, Some(&id), parse_granularity(req.granularity.as_deref())?)?;
    let records = store.records(&manifest.run_id, g)?;
    let weights = req.weights.apply(&manifest.config.weights);
    let result = what_if(&records, &weights, manifest.config.eigen)?;
    let dates = result
        .dates
        .into_iter()
        .map(|d| WhatIfDateOut {
            date: d.date,
            criterion_weights: criterion_map(&d.criterion_weights, |v| v),
            rows: d
                .rows
                .into_iter()
                .map(|r| WhatIfRowOut {
                    protocol: r.protocol,
                    score: decimal(r.score),
                    rank: r.rank,
                    criteria: criterion_map(&r.criteria, decimal),
                })
                .collect(),
        })
        .collect();
    Ok(Json(WhatIfResponse {
        run_id: manifest.run_id,
        granularity: g,
        weight_matrices: result.weight_matrices.iter().map(MatrixSummary::from).collect(),
        consistency_warning: result.consistency_warning,
        dates,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyRequest {
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConsistencyResponse {
    pub n: usize,
    pub lambda_max: f64,
    pub weights: Vec<f64>,
    pub ci: f64,
    pub ri: f64,
    pub cr: f64,
    pub pass: bool,
    /// |(M w)_i − λ_max w_i| per row; the largest marks the row to revisit.
    pub row_residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn consistency_response(m: &PairwiseMatrix, eig: &EigenResult, c: &ConsistencyReport) -> ConsistencyResponse {
    ConsistencyResponse {
        n: c.n,
        lambda_max: eig.lambda_max,
        weights: eig.weights.clone(),
        ci: c.ci,
        ri: c.ri,
        cr: c.cr,
        pass: c.pass,
        row_residuals: ahp::row_residuals(m, eig),
        iterations: eig.iterations,
        converged: eig.converged,
    }
}

async fn consistency(body: Bytes) -> ApiResult<ConsistencyResponse> {
    let req: ConsistencyRequest = parse_body(&body)?;
    let m =
        PairwiseMatrix::from_judgments(&req.matrix).map_err(|e| ApiError::bad_request(ahp_code(&e), e.to_string()))?;
    let settings = EigenSettings::default();
    let eig = match ahp::principal_eigen(&m, settings.tol, settings.max_iter) {
        Ok(eig) => eig,
        Err(ahp::AhpError::NotConverged { best }) => best,
        Err(e) => return Err(ApiError::bad_request(ahp_code(&e), e.to_string())),
    };
    let c = ahp::consistency(&m, &eig);
    Ok(Json(consistency_response(&m, &eig, &c)))
}
