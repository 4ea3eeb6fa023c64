//! HTTP service over one loaded model artifact.
//!
//! | route                 | body                                   |
//! |-----------------------|----------------------------------------|
//! | `POST /api/recommend` | [`RecommendRequest`] → [`RecommendResponse`] |
//! | `GET /api/journals`   | `[{journal_id, name}]`                 |
//! | `GET /api/model`      | [`ModelInfo`]                          |
//! | `GET /healthz`        | liveness, answers before the model loads |
//!
//! Errors are `{"error": name, "detail": text}`: 400 for invalid requests,
//! 503 until the artifact has loaded.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use simrec_core::corpus::{compose_features, FeatureCombo, PaperRecord};
use simrec_core::recommender::{recommend_top_k, TrainedModel};
use simrec_core::text::Normalizer;

use crate::artifact::ModelArtifact;

pub const MAX_K: usize = 100;

fn default_k() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendRequest {
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Must match the loaded artifact when given.
    #[serde(default)]
    pub use_scopes: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendedJournal {
    pub journal_id: String,
    pub name: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub combo: FeatureCombo,
    pub architecture: String,
    pub artifact_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub items: Vec<RecommendedJournal>,
    pub model_info: ModelInfo,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    pub detail: String,
}

impl ApiError {
    fn bad_request(error: &str, detail: impl Into<String>) -> Self {
        Self { status: 400, error: error.into(), detail: detail.into() }
    }

    fn unavailable() -> Self {
        Self { status: 503, error: "ModelLoading".into(), detail: "model artifact is not loaded yet".into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

/// Immutable serving state for one artifact.
#[derive(Clone, Debug)]
pub struct Recommender {
    pub model: TrainedModel,
    pub normalizer: Normalizer,
    pub info: ModelInfo,
}

impl Recommender {
    pub fn new(model: TrainedModel, normalizer: Normalizer) -> Self {
        let info =
            ModelInfo { combo: model.combo, architecture: model.head.kind().into(), artifact_hash: model.fingerprint() };
        Self { model, normalizer, info }
    }
}

impl From<ModelArtifact> for Recommender {
    fn from(a: ModelArtifact) -> Self {
        Recommender::new(a.model, a.normalizer)
    }
}

/// normalize → compose per the artifact's combo → encode → head → Top-K.
pub fn handle_recommend(rec: &Recommender, req: &RecommendRequest) -> Result<RecommendResponse, ApiError> {
    if !(1..=MAX_K).contains(&req.k) {
        return Err(ApiError::bad_request("InvalidK", format!("k must be in 1..={MAX_K}, got {}", req.k)));
    }
    if let Some(s) = req.use_scopes {
        if s != rec.model.combo.use_scopes {
            return Err(ApiError::bad_request(
                "ScopesUnavailable",
                format!("loaded artifact is {}; restart with another artifact", rec.model.combo),
            ));
        }
    }
    let record = PaperRecord {
        id: String::new(),
        title: req.title.clone(),
        abstract_text: req.abstract_text.clone(),
        keywords: req.keywords.clone(),
        journal_id: String::new(),
    };
    let text = compose_features(&rec.normalizer, &record, rec.model.combo)
        .map_err(|e| ApiError::bad_request(e.name(), e.to_string()))?;
    let probs = rec.model.predict_texts(&[text]).map_err(|e| ApiError {
        status: 500,
        error: e.name().into(),
        detail: e.to_string(),
    })?;
    let ranked = recommend_top_k(probs.row(0), req.k);
    let items = ranked
        .items
        .iter()
        .map(|it| {
            let j = rec.model.journals.get(it.journal);
            RecommendedJournal { journal_id: j.journal_id.clone(), name: j.name.clone(), score: it.score }
        })
        .collect();
    Ok(RecommendResponse { items, model_info: rec.info.clone() })
}

/// Shared by all handlers. The model slot is filled once.
#[derive(Debug, Default)]
pub struct AppState {
    model: OnceLock<Arc<Recommender>>,
    requests: AtomicU64,
}

impl AppState {
    pub fn loaded(rec: Recommender) -> Arc<Self> {
        let s = Self::default();
        let _ = s.model.set(Arc::new(rec));
        Arc::new(s)
    }

    pub fn pending() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Installs the model; returns false if one was already installed.
    pub fn install(&self, rec: Recommender) -> bool {
        self.model.set(Arc::new(rec)).is_ok()
    }

    pub fn requests_served(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    fn model(&self) -> Result<&Arc<Recommender>, ApiError> {
        self.model.get().ok_or_else(ApiError::unavailable)
    }
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    model_loaded: bool,
    requests_served: u64,
}

#[derive(Serialize)]
struct JournalEntry<'a> {
    journal_id: &'a str,
    name: &'a str,
}

async fn healthz(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    Json(Health { status: "ok", model_loaded: state.model.get().is_some(), requests_served: state.requests_served() })
}

async fn journals(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let rec = state.model()?;
    let list: Vec<JournalEntry> =
        rec.model.journals.iter().map(|j| JournalEntry { journal_id: &j.journal_id, name: &j.name }).collect();
    Ok(Json(list).into_response())
}

async fn model_info(State(state): State<Arc<AppState>>) -> Result<Json<ModelInfo>, ApiError> {
    Ok(Json(state.model()?.info.clone()))
}

async fn recommend(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<RecommendResponse>, ApiError> {
    let rec = state.model()?;
    let req: RecommendRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("InvalidRequest", e.to_string()))?;
    state.requests.fetch_add(1, Ordering::Relaxed);
    // Inference is CPU-bound; keep it off the async workers.
    let rec = Arc::clone(rec);
    let out = tokio::task::spawn_blocking(move || handle_recommend(&rec, &req))
        .await
        .map_err(|e| ApiError { status: 500, error: "Internal".into(), detail: e.to_string() })?;
    out.map(Json)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/recommend", post(recommend))
        .route("/api/journals", get(journals))
        .route("/api/model", get(model_info))
        .route("/healthz", get(healthz))
        .with_state(state)
}
