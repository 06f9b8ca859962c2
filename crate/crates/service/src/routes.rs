use std::sync::Arc;

use axum::extract::{FromRequest, FromRequestParts, State};
use axum::http::{header, Method, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use rashgam_core::apps::{
    jump_analysis, monotone_fit, project_edit, vi_range, ChainConstraint, Direction, JumpReport, MonotoneResult,
    Projection, VariableImportanceRange, ViMode,
};
use rashgam_core::io::ShapeFunction;

use crate::error::ApiError;
use crate::session::{AppState, Session};

/// Upper bound on `n` for the sampling endpoints.
pub const MAX_SAMPLES: usize = 100_000;

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
struct Body<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
struct Query<T>(T);

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api/model", get(model))
        .route("/api/ellipsoid/meta", get(meta))
        .route("/api/contains", post(contains))
        .route("/api/project", post(project))
        .route("/api/monotone", post(monotone))
        .route("/api/vi", get(vi))
        .route("/api/sample", post(sample))
        .route("/api/jumps", post(jumps))
        .route("/api/reload", post(reload))
        .route("/api/spec", get(spec))
        .layer(cors)
        .with_state(state)
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn check_dim(s: &Session, w: &[f64]) -> Result<(), ApiError> {
    let d = s.ellipsoid().dim();
    if w.len() != d {
        return Err(ApiError::mismatch(d, w.len()));
    }
    Ok(())
}

fn check_feature(s: &Session, j: usize) -> Result<std::ops::Range<usize>, ApiError> {
    s.feature_block(j).ok_or_else(|| {
        ApiError::domain(
            "invalid_feature",
            format!("feature {j} does not exist (model has {})", s.n_features()),
        )
    })
}

fn check_count(n: usize) -> Result<(), ApiError> {
    if n == 0 || n > MAX_SAMPLES {
        return Err(ApiError::domain("invalid_count", format!("n must be in 1..={MAX_SAMPLES}")));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelView {
    pub feature_names: Vec<String>,
    pub bin_edges: Vec<Vec<f64>>,
    /// Intercept followed by one coefficient per step (ellipsoid order).
    pub params: Vec<f64>,
    /// Half-open ranges of `params` indices per feature.
    pub blocks: Vec<(usize, usize)>,
    pub shape_functions: Vec<ShapeFunction>,
}

async fn model(State(state): State<AppState>) -> ApiResult<ModelView> {
    let s = state.snapshot();
    Ok(Json(ModelView {
        feature_names: s.model.feature_names.clone(),
        bin_edges: s.model.bin_edges.clone(),
        params: s.model.reduced_params()?,
        blocks: s.blocks().into_iter().map(|b| (b.start, b.end)).collect(),
        shape_functions: s.model.shape_functions()?,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Meta {
    pub dim: usize,
    pub theta: f64,
    pub log_volume: f64,
    pub loss_at_center: f64,
    pub lambda2: f64,
    pub lambda_s: f64,
    pub center: Vec<f64>,
}

async fn meta(State(state): State<AppState>) -> ApiResult<Meta> {
    let s = state.snapshot();
    let d = &s.ellipsoid_doc;
    Ok(Json(Meta {
        dim: d.dim,
        theta: d.theta,
        log_volume: s.ellipsoid().log_volume(),
        loss_at_center: d.loss_at_center,
        lambda2: d.lambda2,
        lambda_s: d.lambda_s,
        center: d.center.clone(),
    }))
}

#[derive(Debug, Deserialize)]
pub struct ContainsReq {
    pub omega: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ContainsResp {
    pub q: f64,
    pub inside: bool,
}

async fn contains(State(state): State<AppState>, Body(req): Body<ContainsReq>) -> ApiResult<ContainsResp> {
    let s = state.snapshot();
    check_dim(&s, &req.omega)?;
    let (q, inside) = s.ellipsoid().contains(&req.omega)?;
    Ok(Json(ContainsResp { q, inside }))
}

#[derive(Debug, Deserialize)]
pub struct ProjectReq {
    pub omega_req: Vec<f64>,
}

async fn project(State(state): State<AppState>, Body(req): Body<ProjectReq>) -> ApiResult<Projection> {
    let s = state.snapshot();
    check_dim(&s, &req.omega_req)?;
    Ok(Json(project_edit(s.ellipsoid(), &req.omega_req)?))
}

#[derive(Debug, Deserialize)]
pub struct ChainReq {
    pub feature: usize,
    pub direction: Direction,
}

#[derive(Debug, Deserialize)]
pub struct MonotoneReq {
    pub feature: usize,
    pub direction: Direction,
    /// Further features constrained at the same time.
    #[serde(default)]
    pub extra: Vec<ChainReq>,
    /// `(coordinate, value)` pins.
    #[serde(default)]
    pub fixed: Vec<(usize, f64)>,
}

async fn monotone(State(state): State<AppState>, Body(req): Body<MonotoneReq>) -> ApiResult<MonotoneResult> {
    let s = state.snapshot();
    let mut chains = Vec::with_capacity(1 + req.extra.len());
    for c in std::iter::once(ChainReq {
        feature: req.feature,
        direction: req.direction,
    })
    .chain(req.extra)
    {
        chains.push(ChainConstraint {
            block: check_feature(&s, c.feature)?,
            direction: c.direction,
        });
    }
    let d = s.ellipsoid().dim();
    if let Some(&(c, _)) = req.fixed.iter().find(|(c, _)| *c >= d) {
        return Err(ApiError::domain("invalid_coordinate", format!("coordinate {c} >= dimension {d}")));
    }
    let fixed = req.fixed;
    blocking(move || Ok(Json(monotone_fit(s.ellipsoid(), &chains, &fixed)?))).await
}

#[derive(Debug, Deserialize)]
pub struct ViQuery {
    #[serde(default)]
    pub fix_others: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ViRow {
    pub name: String,
    #[serde(flatten)]
    pub range: VariableImportanceRange,
}

async fn vi(State(state): State<AppState>, Query(q): Query<ViQuery>) -> ApiResult<Vec<ViRow>> {
    let s = state.snapshot();
    let mode = if q.fix_others { ViMode::FixOthers } else { ViMode::Free };
    blocking(move || {
        let w = s
            .weights()
            .ok_or_else(|| ApiError::domain("missing_weights", "model document carries no bin weights"))?;
        let rows = s
            .blocks()
            .into_iter()
            .enumerate()
            .map(|(j, b)| {
                let range = vi_range(s.ellipsoid(), j, b.clone(), &w[b.start - 1..b.end - 1], mode)?;
                Ok(ViRow {
                    name: s.model.feature_names[j].clone(),
                    range,
                })
            })
            .collect::<Result<Vec<_>, ApiError>>()?;
        Ok(Json(rows))
    })
    .await
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Deserialize)]
pub struct SampleReq {
    pub n: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleResp {
    pub samples: Vec<Vec<f64>>,
}

async fn sample(State(state): State<AppState>, Body(req): Body<SampleReq>) -> ApiResult<SampleResp> {
    check_count(req.n)?;
    let s = state.snapshot();
    blocking(move || {
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let samples = (0..req.n)
            .map(|_| s.ellipsoid().sample(&mut rng).as_slice().to_vec())
            .collect();
        Ok(Json(SampleResp { samples }))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct JumpReq {
    pub feature: usize,
    /// Boundary between bins `k` and `k + 1`.
    pub k: usize,
    pub n: usize,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

async fn jumps(State(state): State<AppState>, Body(req): Body<JumpReq>) -> ApiResult<JumpReport> {
    check_count(req.n)?;
    let s = state.snapshot();
    check_feature(&s, req.feature)?;
    let (left, right) = match (s.bin_coordinate(req.feature, req.k), s.bin_coordinate(req.feature, req.k + 1)) {
        (Some(l), Some(r)) => (l, r),
        _ => {
            return Err(ApiError::domain(
                "invalid_boundary",
                format!("feature {} has {} bins; k must be below {}", req.feature, s.bins(req.feature), s.bins(req.feature).saturating_sub(1)),
            ))
        }
    };
    blocking(move || {
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        Ok(Json(jump_analysis(s.ellipsoid(), req.feature, req.k, left, right, req.n, req.tau, &mut rng)?))
    })
    .await
}

async fn reload(State(state): State<AppState>) -> ApiResult<Meta> {
    if !state.has_sources() {
        return Err(ApiError::domain("no_sources", "session was not loaded from files"));
    }
    let st = state.clone();
    blocking(move || Ok(st.reload_from_sources()?)).await?;
    meta(State(state)).await
}

async fn spec() -> Json<serde_json::Value> {
    Json(Arc::unwrap_or_clone(crate::openapi::document()))
}
