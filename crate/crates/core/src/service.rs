//! HTTP/JSON service around one engine.
//!
//! | method | path | body / query | success |
//! |---|---|---|---|
//! | POST | `/v1/dialogue` | `{session_id, text?, caption?, location?, emotion?}` | [`DialogueResponse`] |
//! | DELETE | `/v1/contributions/{id}` | | [`DeletionReceipt`] |
//! | POST | `/v1/admin/tick` | `{days}` | [`LifecycleReport`] |
//! | POST | `/v1/admin/restore/{fragment_id}` | | [`MemoryView`] |
//! | GET | `/v1/avatar` | | [`ExpressionState`] |
//! | GET | `/v1/memories` | `?status=active\|decaying\|archived` | `[MemoryView]` |
//! | GET | `/v1/memories/{id}` | | [`MemoryDetail`] |
//! | GET | `/v1/summaries` | | `[SelfSummary]` |
//! | GET | `/v1/bundles/{id}` | | [`ContextBundle`] |
//!
//! Errors are `{"error": "..."}` with 400 for bad input, 404 for unknown
//! ids, 409 while an admin tick runs and 502 when the dialogue client fails.
//! A 502 also carries `bundle_id`; ingestion has already been logged by then
//! and the bundle stays retrievable for a retry.

use std::collections::BTreeSet;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::avatar::ExpressionState;
use crate::config::EngineConfig;
use crate::dialogue::DialogueClient;
use crate::engine::Engine;
use crate::error::DcmError;
use crate::fusion::{respond, ContextBundle};
use crate::lifecycle::{LifecycleReport, SelfSummary};
use crate::memory::{ContributionId, Day, FragmentId, MemoryFragment, Status, ThemeKey};
use crate::store::DeletionReceipt;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<RwLock<Engine>>,
    client: Arc<dyn DialogueClient>,
    ticking: Arc<AtomicBool>,
}

impl AppState {
    pub fn new(engine: Engine, client: Arc<dyn DialogueClient>) -> Self {
        Self {
            engine: Arc::new(RwLock::new(engine)),
            client,
            ticking: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn engine(&self) -> Arc<RwLock<Engine>> {
        Arc::clone(&self.engine)
    }

    /// Marks a tick as running; `None` if one already is.
    pub fn begin_tick(&self) -> Option<TickGuard> {
        self.ticking
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| TickGuard(Arc::clone(&self.ticking)))
    }

    fn read(&self) -> RwLockReadGuard<'_, Engine> {
        self.engine.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Engine> {
        self.engine.write().unwrap_or_else(|e| e.into_inner())
    }
}

pub struct TickGuard(Arc<AtomicBool>);

impl Drop for TickGuard {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    bundle_id: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            bundle_id: None,
        }
    }

    fn tick_in_progress() -> Self {
        Self::new(StatusCode::CONFLICT, "an admin tick is in progress")
    }
}

impl From<DcmError> for ApiError {
    fn from(e: DcmError) -> Self {
        let status = match &e {
            DcmError::RejectedInput(_)
            | DcmError::UnknownSession(_)
            | DcmError::InvalidArgument(_)
            | DcmError::UnknownPlace(_)
            | DcmError::Corpus { .. } => StatusCode::BAD_REQUEST,
            DcmError::NotFound(_) => StatusCode::NOT_FOUND,
            DcmError::StaleFragment(_) => StatusCode::CONFLICT,
            DcmError::Dialogue { .. } => StatusCode::BAD_GATEWAY,
            DcmError::Config(_) | DcmError::Io(_) | DcmError::Json(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let bundle_id = match &e {
            DcmError::Dialogue { bundle_id, .. } => Some(bundle_id.clone()),
            _ => None,
        };
        Self {
            status,
            message: e.to_string(),
            bundle_id,
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = match self.bundle_id {
            Some(id) => json!({ "error": self.message, "bundle_id": id }),
            None => json!({ "error": self.message }),
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

async fn blocking<T, F>(f: F) -> std::result::Result<T, ApiError>
where
    F: FnOnce() -> std::result::Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogueInput {
    pub session_id: String,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub caption: Option<String>,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub emotion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueResponse {
    pub response_text: String,
    pub bundle: ContextBundle,
    pub expression: ExpressionState,
    pub fragment_ids: Vec<FragmentId>,
    pub contribution_ids: Vec<ContributionId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryView {
    pub id: FragmentId,
    pub theme: ThemeKey,
    pub text: String,
    pub weight: f64,
    pub status: Status,
    pub frequency: u32,
    pub emotion: f64,
    pub place_tags: BTreeSet<String>,
    pub contribution_ids: Vec<ContributionId>,
    pub low_weight_days: u32,
    pub created_at: Day,
    pub last_touched: Day,
}

impl MemoryView {
    pub fn of(f: &MemoryFragment) -> Self {
        Self {
            id: f.id.clone(),
            theme: f.theme.clone(),
            text: f.text.clone(),
            weight: f.weight,
            status: f.status,
            frequency: f.frequency,
            emotion: f.emotion,
            place_tags: f.place_tags.clone(),
            contribution_ids: f.contributions.keys().cloned().collect(),
            low_weight_days: f.low_weight_days,
            created_at: f.created_at,
            last_touched: f.last_touched,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionView {
    pub id: ContributionId,
    pub session: String,
    pub day: Day,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryDetail {
    #[serde(flatten)]
    pub memory: MemoryView,
    pub contributions: Vec<ContributionView>,
    pub conflicts_with: Vec<FragmentId>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TickInput {
    pub days: u32,
}

#[derive(Debug, Clone, Deserialize)]
pub struct StatusQuery {
    pub status: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/dialogue", post(dialogue))
        .route("/v1/contributions/{id}", delete(delete_contribution))
        .route("/v1/admin/tick", post(tick))
        .route("/v1/admin/restore/{id}", post(restore))
        .route("/v1/avatar", get(avatar))
        .route("/v1/memories", get(memories))
        .route("/v1/memories/{id}", get(memory))
        .route("/v1/summaries", get(summaries))
        .route("/v1/bundles/{id}", get(bundle))
        .with_state(state)
}

fn non_empty(s: &Option<String>) -> Option<&str> {
    s.as_deref().filter(|t| !t.trim().is_empty())
}

async fn dialogue(
    State(state): State<AppState>,
    body: std::result::Result<Json<DialogueInput>, JsonRejection>,
) -> ApiResult<DialogueResponse> {
    let Json(input) = body?;
    if state.ticking.load(Ordering::Acquire) {
        return Err(ApiError::tick_in_progress());
    }
    let text = non_empty(&input.text).map(str::to_string);
    let caption = non_empty(&input.caption).map(str::to_string);
    let Some(query) = text.clone().or_else(|| caption.clone()) else {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "text or caption is required"));
    };

    let worker = state.clone();
    let context_query = query.clone();
    let (bundle, expression, fragment_ids, contribution_ids, seed) = blocking(move || {
        let mut engine = worker.write();
        let mut fragments = Vec::new();
        let mut contributions = Vec::new();
        if let Some(caption) = &caption {
            let location = non_empty(&input.location).ok_or_else(|| {
                ApiError::new(StatusCode::BAD_REQUEST, "a caption needs a location")
            })?;
            let out = engine.ingest_photo_caption(caption, location, &input.session_id, false)?;
            fragments.push(out.fragment_id);
            contributions.push(out.contribution_id);
        }
        if let Some(text) = &text {
            let day = engine.clock();
            let out = engine.ingest_fragment(text, &input.session_id, input.emotion, &[], day)?;
            fragments.push(out.fragment_id);
            contributions.push(out.contribution_id);
        }
        fragments.dedup();
        let k = engine.context_k();
        let bundle = engine.build_context(&context_query, k)?;
        Ok((bundle, engine.expression(), fragments, contributions, engine.seed()))
    })
    .await?;

    let client = Arc::clone(&state.client);
    let reply_bundle = bundle.clone();
    let response_text =
        blocking(move || Ok(respond(&reply_bundle, &query, client.as_ref(), seed)?)).await?;
    Ok(Json(DialogueResponse {
        response_text,
        bundle,
        expression,
        fragment_ids,
        contribution_ids,
    }))
}

async fn delete_contribution(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<DeletionReceipt> {
    if state.ticking.load(Ordering::Acquire) {
        return Err(ApiError::tick_in_progress());
    }
    blocking(move || Ok(Json(state.write().delete_contribution(&ContributionId(id))?))).await
}

async fn tick(
    State(state): State<AppState>,
    body: std::result::Result<Json<TickInput>, JsonRejection>,
) -> ApiResult<LifecycleReport> {
    let Json(input) = body?;
    let guard = state.begin_tick().ok_or_else(ApiError::tick_in_progress)?;
    blocking(move || {
        let _guard = guard;
        let client = Arc::clone(&state.client);
        Ok(Json(state.write().tick(input.days, client.as_ref())?))
    })
    .await
}

async fn restore(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<MemoryView> {
    if state.ticking.load(Ordering::Acquire) {
        return Err(ApiError::tick_in_progress());
    }
    blocking(move || {
        let id = FragmentId(id);
        let mut engine = state.write();
        engine.restore(&id)?;
        let f = engine.graph().fragment(&id).expect("restored fragment exists");
        Ok(Json(MemoryView::of(f)))
    })
    .await
}

async fn avatar(State(state): State<AppState>) -> ApiResult<ExpressionState> {
    blocking(move || Ok(Json(state.read().expression()))).await
}

async fn memories(
    State(state): State<AppState>,
    Query(q): Query<StatusQuery>,
) -> ApiResult<Vec<MemoryView>> {
    let filter = match q.status.as_deref() {
        None => None,
        Some(s) => Some(
            Status::from_str(s)
                .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, format!("bad status {s:?}")))?,
        ),
    };
    blocking(move || {
        let engine = state.read();
        Ok(Json(
            engine
                .graph()
                .fragments
                .values()
                .filter(|f| filter.is_none_or(|s| f.status == s))
                .map(MemoryView::of)
                .collect(),
        ))
    })
    .await
}

async fn memory(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<MemoryDetail> {
    blocking(move || {
        let engine = state.read();
        let graph = engine.graph();
        let id = FragmentId(id);
        let f = graph
            .fragment(&id)
            .ok_or_else(|| ApiError::from(DcmError::NotFound(format!("fragment {id}"))))?;
        Ok(Json(MemoryDetail {
            memory: MemoryView::of(f),
            contributions: f
                .contributions
                .values()
                .map(|c| ContributionView {
                    id: c.id.clone(),
                    session: c.session.clone(),
                    day: c.day,
                    text: c.text.clone(),
                })
                .collect(),
            conflicts_with: graph
                .conflicts
                .iter()
                .filter(|c| c.involves(&id))
                .map(|c| {
                    if c.fragment_a == id {
                        c.fragment_b.clone()
                    } else {
                        c.fragment_a.clone()
                    }
                })
                .collect(),
        }))
    })
    .await
}

async fn summaries(State(state): State<AppState>) -> ApiResult<Vec<SelfSummary>> {
    blocking(move || Ok(Json(state.read().graph().summaries.clone()))).await
}

async fn bundle(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<ContextBundle> {
    blocking(move || {
        state
            .read()
            .bundle(&id)
            .map(Json)
            .ok_or_else(|| DcmError::NotFound(format!("bundle {id}")).into())
    })
    .await
}

/// Runs the service until ctrl-c.
pub async fn serve(config: EngineConfig) -> crate::Result<()> {
    let client = config.dialogue.build()?;
    let port = config.port;
    let engine = tokio::task::spawn_blocking(move || Engine::new(&config))
        .await
        .map_err(|e| DcmError::Config(e.to_string()))??;
    let app = router(AppState::new(engine, client));
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
