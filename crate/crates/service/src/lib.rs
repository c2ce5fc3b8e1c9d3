//! Read-only HTTP JSON API over a trained model.
//!
//! Endpoints:
//!
//! - `GET /api/categories`: categories with kinds and sizes, plus query defaults
//! - `GET /api/related?category&token&target&measure&k`: nearest elements
//! - `GET /api/element?category&token`: existence and corpus frequency
//! - `GET /healthz`
//!
//! Every error is a JSON body `{"error": ..., "suggestions": [...]}` with a
//! 4xx status.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use bibvec::search::{resolve_query, suggest, top_k, MAX_SUGGESTIONS};
use bibvec::{EmbeddingModel, Error, SimilarityMeasure, Vocabulary};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub const DEFAULT_K: usize = 30;
pub const DEFAULT_MEASURE: SimilarityMeasure = SimilarityMeasure::Linear;

/// Rounds to 6 significant digits, the precision scores are served with.
pub fn round_score(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

struct Shared {
    model: EmbeddingModel,
    vocab: Vocabulary,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(model: EmbeddingModel, vocab: Vocabulary) -> Self {
        AppState(Arc::new(Shared { model, vocab }))
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ApiError {
    pub error: String,
    #[serde(default)]
    pub suggestions: Vec<String>,
}

struct Failure(StatusCode, ApiError);

impl Failure {
    fn bad_request(msg: impl Into<String>) -> Self {
        Failure(
            StatusCode::BAD_REQUEST,
            ApiError {
                error: msg.into(),
                suggestions: vec![],
            },
        )
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotFound { .. } => StatusCode::NOT_FOUND,
            Error::ZeroNorm => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        let suggestions = match &e {
            Error::NotFound { suggestions, .. } => suggestions.clone(),
            _ => vec![],
        };
        Failure(
            status,
            ApiError {
                error: e.to_string(),
                suggestions,
            },
        )
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CategoryInfo {
    pub name: String,
    pub kind: String,
    pub size: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Defaults {
    pub k: usize,
    pub measure: SimilarityMeasure,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CategoriesResponse {
    pub dim: usize,
    pub categories: Vec<CategoryInfo>,
    pub measures: Vec<SimilarityMeasure>,
    pub defaults: Defaults,
}

async fn categories(State(state): State<AppState>) -> Json<CategoriesResponse> {
    let categories = state
        .0
        .vocab
        .categories()
        .iter()
        .map(|c| CategoryInfo {
            name: c.name().to_string(),
            kind: c.kind().as_str().to_string(),
            size: c.len(),
        })
        .collect();
    Json(CategoriesResponse {
        dim: state.0.model.dim(),
        categories,
        measures: SimilarityMeasure::ALL.to_vec(),
        defaults: Defaults {
            k: DEFAULT_K,
            measure: DEFAULT_MEASURE,
        },
    })
}

/// Query parameters arrive as strings so that bad values produce JSON
/// errors rather than the framework's plain-text rejections.
#[derive(Debug, Default, Deserialize)]
pub struct RelatedParams {
    pub category: Option<String>,
    pub token: Option<String>,
    pub target: Option<String>,
    pub measure: Option<String>,
    pub k: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QueryEcho {
    pub category: String,
    pub token: String,
    pub target: String,
    pub measure: SimilarityMeasure,
    pub k: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RelatedItem {
    pub token: String,
    pub category: String,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RelatedResponse {
    pub query: QueryEcho,
    pub results: Vec<RelatedItem>,
}

fn required(value: Option<String>, name: &str) -> Result<String, Failure> {
    match value {
        Some(v) if !v.trim().is_empty() => Ok(v),
        _ => Err(Failure::bad_request(format!("missing parameter {name:?}"))),
    }
}

/// Runs a related-elements query. Exposed so callers can reuse the exact
/// ranking the HTTP endpoint serves.
pub fn related(
    model: &EmbeddingModel,
    vocab: &Vocabulary,
    category: &str,
    token: &str,
    target: &str,
    measure: SimilarityMeasure,
    k: usize,
) -> Result<RelatedResponse, Error> {
    let query = resolve_query(vocab, category, token)?;
    let target_cat = vocab.category_index(target)?;
    let ranked = top_k(model, vocab, query, target_cat, measure, k, &HashSet::new())?;
    let results = ranked
        .entries
        .iter()
        .map(|(e, score)| {
            let cat = vocab.category(e.category);
            RelatedItem {
                token: cat.token(e.index).to_string(),
                category: cat.name().to_string(),
                score: round_score(*score),
            }
        })
        .collect();
    Ok(RelatedResponse {
        query: QueryEcho {
            category: category.to_string(),
            token: token.to_string(),
            target: target.to_string(),
            measure,
            k,
        },
        results,
    })
}

async fn related_handler(
    State(state): State<AppState>,
    Query(params): Query<RelatedParams>,
) -> Result<Json<RelatedResponse>, Failure> {
    let category = required(params.category, "category")?;
    let token = required(params.token, "token")?;
    let target = required(params.target, "target")?;
    let measure = match params.measure {
        None => DEFAULT_MEASURE,
        Some(m) => m.parse().map_err(Failure::from)?,
    };
    let k = match params.k {
        None => DEFAULT_K,
        Some(k) => k.parse::<usize>().map_err(|_| {
            Failure::bad_request(format!("k must be a positive integer, got {k:?}"))
        })?,
    };
    let shared = &state.0;
    let response = related(
        &shared.model,
        &shared.vocab,
        &category,
        &token,
        &target,
        measure,
        k,
    )?;
    log::debug!(
        "related {category}/{token} -> {target} ({measure}, k={k}): {} results",
        response.results.len()
    );
    Ok(Json(response))
}

#[derive(Debug, Default, Deserialize)]
pub struct ElementParams {
    pub category: Option<String>,
    pub token: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ElementResponse {
    pub category: String,
    pub token: String,
    pub exists: bool,
    /// Training-corpus count; 0 when the token is not in the vocabulary.
    pub frequency: u64,
    /// Close matches, only for unknown tokens.
    pub suggestions: Vec<String>,
}

async fn element(
    State(state): State<AppState>,
    Query(params): Query<ElementParams>,
) -> Result<Json<ElementResponse>, Failure> {
    let category = required(params.category, "category")?;
    let token = required(params.token, "token")?;
    let vocab = &state.0.vocab;
    let cat = vocab.category(vocab.category_index(&category)?);
    let (exists, frequency, suggestions) = match cat.get(&token) {
        Some(i) => (true, cat.freqs()[i], vec![]),
        None => (false, 0, suggest(cat.tokens(), &token, MAX_SUGGESTIONS)),
    };
    Ok(Json(ElementResponse {
        category,
        token,
        exists,
        frequency,
        suggestions,
    }))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn not_found() -> Failure {
    Failure(
        StatusCode::NOT_FOUND,
        ApiError {
            error: "no such endpoint".into(),
            suggestions: vec![],
        },
    )
}

/// The API routes, with `static_dir` (if any) served for every other path.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/categories", get(categories))
        .route("/api/related", get(related_handler))
        .route("/api/element", get(element))
        .route("/api/{*rest}", get(not_found))
        .route("/healthz", get(healthz));
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    app.with_state(state)
}

/// Serves until Ctrl-C. Fails if the address cannot be bound.
pub async fn serve(
    model: EmbeddingModel,
    vocab: Vocabulary,
    addr: SocketAddr,
    static_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    let app = router(AppState::new(model, vocab), static_dir);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await
}
