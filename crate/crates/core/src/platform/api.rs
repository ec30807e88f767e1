//! `/v1` HTTP API over [`Service`].
//!
//! Errors are `{"code": ..., "message": ...}` with a 4xx status for contract
//! violations and 5xx for adapter or storage failures. Invalid stories add a
//! `violations` array.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::service::{AttemptAudio, Service, ServiceError};
use crate::adapters::AudioRef;
use crate::analytics::{CardFilter, TimeRange};
use crate::lexicon::Position;
use crate::phonology::QualityBand;
use crate::story::{GenerationSpec, Mode, StoryConfig};
use crate::time::{SystemClock, Clock, Timestamp};

pub type AppState = Arc<Service>;

/// Largest accepted request body (attempt audio included).
pub const MAX_BODY_BYTES: usize = 16 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(ServiceError::BadRequest(e.body_text()))
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError(ServiceError::BadRequest(e.body_text()))
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(ServiceError::BadRequest(msg.into()))
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let mut body = json!({ "code": self.0.code(), "message": self.0.to_string() });
        if let Some(v) = self.0.violations() {
            body["violations"] = serde_json::to_value(v).unwrap_or_default();
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking service work off the async executor.
async fn blocking<T: Send + 'static>(
    svc: &AppState,
    f: impl FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
) -> ApiResult<T> {
    let svc = Arc::clone(svc);
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| bad_request(format!("worker failed: {e}")))?
        .map_err(ApiError)
}

pub fn router(service: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/stories", get(list_stories).post(create_story))
        .route("/v1/stories/validate", post(validate_story))
        .route("/v1/stories/generate", post(generate_story))
        .route("/v1/stories/{id}", get(get_story))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/turn", get(current_turn))
        .route("/v1/sessions/{id}/attempts", post(submit_attempt))
        .route("/v1/sessions/{id}/choice", post(apply_choice))
        .route("/v1/sessions/{id}/events", get(session_events))
        .route("/v1/sessions/{id}/attempts/{attempt}/audio", get(attempt_audio))
        .route("/v1/audio/{audio_ref}", get(audio))
        .route("/v1/words/recommend", get(recommend))
        .route("/v1/words/{word}/practice", get(practice))
        .route("/v1/score", post(score))
        .route("/v1/children/{child}/dashboard", get(dashboard))
        .route("/v1/children/{child}/cards", get(cards))
        .route("/v1/children/{child}/report", get(report))
        .layer(axum::extract::DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(service)
}

/// Serves until ctrl-c. A background task abandons idle sessions every `sweep_every`.
pub async fn serve(service: AppState, listen: &str, sweep_every: Duration) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let sweeper = Arc::clone(&service);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweep_every);
        loop {
            tick.tick().await;
            let svc = Arc::clone(&sweeper);
            let swept = tokio::task::spawn_blocking(move || svc.sweep_idle(SystemClock.now())).await;
            match swept {
                Ok(Ok(ids)) if !ids.is_empty() => tracing::info!(count = ids.len(), "abandoned idle sessions"),
                Ok(Err(e)) => tracing::warn!(error = %e, "idle sweep failed"),
                _ => {}
            }
        }
    });
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

// ---- stories ----

async fn list_stories(State(svc): State<AppState>) -> ApiResult<Json<Vec<StoryConfig>>> {
    Ok(Json(blocking(&svc, |s| s.list_stories()).await?))
}

async fn get_story(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<StoryConfig>> {
    Ok(Json(blocking(&svc, move |s| s.get_story(&id)).await?))
}

async fn create_story(
    State(svc): State<AppState>,
    body: Result<Json<StoryConfig>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<StoryConfig>)> {
    let Json(story) = body?;
    let saved = blocking(&svc, move |s| s.create_story(story)).await?;
    Ok((StatusCode::CREATED, Json(saved)))
}

async fn validate_story(
    State(svc): State<AppState>,
    body: Result<Json<StoryConfig>, JsonRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Json(story) = body?;
    let v = svc.validate(&story);
    Ok(Json(json!({ "valid": v.is_empty(), "violations": v })))
}

async fn generate_story(
    State(svc): State<AppState>,
    body: Result<Json<GenerationSpec>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<StoryConfig>)> {
    let Json(spec) = body?;
    let story = blocking(&svc, move |s| s.generate_story(&spec)).await?;
    Ok((StatusCode::CREATED, Json(story)))
}

// ---- sessions ----

#[derive(Debug, Deserialize)]
struct CreateSession {
    child_id: String,
    story_id: String,
    mode: Mode,
}

async fn create_session(
    State(svc): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let state = blocking(&svc, move |s| s.create_session(&req.child_id, &req.story_id, req.mode)).await?;
    Ok((StatusCode::CREATED, Json(state)).into_response())
}

async fn get_session(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&svc, move |s| s.session(&id)).await?).into_response())
}

async fn current_turn(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&svc, move |s| s.current_turn(&id)).await?).into_response())
}

#[derive(Debug, Deserialize)]
struct AttemptJson {
    audio_ref: String,
}

/// Accepts multipart with an `audio` file part or an `audio_ref` text part,
/// or a JSON body `{"audio_ref": ...}`.
async fn submit_attempt(State(svc): State<AppState>, Path(id): Path<String>, req: Request) -> ApiResult<Response> {
    let is_json = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let audio = if is_json {
        let Json(body) = Json::<AttemptJson>::from_request(req, &()).await?;
        AttemptAudio::Ref(AudioRef::new(body.audio_ref).map_err(ServiceError::from)?)
    } else {
        let mut mp = Multipart::from_request(req, &())
            .await
            .map_err(|e| bad_request(e.body_text()))?;
        let mut audio = None;
        while let Some(field) = mp.next_field().await.map_err(|e| bad_request(e.body_text()))? {
            match field.name() {
                Some("audio") => {
                    let bytes = field.bytes().await.map_err(|e| bad_request(e.body_text()))?;
                    if bytes.is_empty() {
                        return Err(bad_request("audio part is empty"));
                    }
                    audio = Some(AttemptAudio::Blob(bytes.to_vec()));
                }
                Some("audio_ref") => {
                    let text = field.text().await.map_err(|e| bad_request(e.body_text()))?;
                    audio = Some(AttemptAudio::Ref(AudioRef::new(text.trim()).map_err(ServiceError::from)?));
                }
                _ => {}
            }
        }
        audio.ok_or_else(|| bad_request("expected an audio or audio_ref part"))?
    };
    Ok(Json(blocking(&svc, move |s| s.submit_attempt(&id, audio)).await?).into_response())
}

#[derive(Debug, Deserialize)]
struct ChoiceBody {
    option_id: String,
}

async fn apply_choice(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ChoiceBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    Ok(Json(blocking(&svc, move |s| s.apply_choice(&id, &req.option_id)).await?).into_response())
}

async fn session_events(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let text = blocking(&svc, move |s| s.session_log(&id)).await?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("application/x-ndjson"))], text).into_response())
}

fn audio_response(bytes: Vec<u8>) -> Response {
    (
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"))],
        Bytes::from(bytes),
    )
        .into_response()
}

async fn attempt_audio(
    State(svc): State<AppState>,
    Path((id, attempt)): Path<(String, String)>,
) -> ApiResult<Response> {
    let bytes = blocking(&svc, move |s| {
        let r = s.replay_recording(&id, &attempt)?;
        Ok(s.store().read_audio(&r)?)
    })
    .await?;
    Ok(audio_response(bytes))
}

async fn audio(State(svc): State<AppState>, Path(audio_ref): Path<String>) -> ApiResult<Response> {
    let r = AudioRef::new(audio_ref).map_err(ServiceError::from)?;
    let bytes = blocking(&svc, move |s| Ok(s.store().read_audio(&r)?)).await?;
    Ok(audio_response(bytes))
}

// ---- words ----

async fn practice(State(svc): State<AppState>, Path(word): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&svc, move |s| s.practice_card(&word)).await?).into_response())
}

#[derive(Debug, Deserialize)]
struct RecommendQuery {
    phoneme: String,
    #[serde(default = "any_position")]
    position: Position,
    #[serde(default = "default_count")]
    count: usize,
}

fn any_position() -> Position {
    Position::Any
}

fn default_count() -> usize {
    10
}

async fn recommend(
    State(svc): State<AppState>,
    q: Result<Query<RecommendQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = q?;
    let words = blocking(&svc, move |s| s.recommend(&q.phoneme, q.position, q.count)).await?;
    Ok(Json(json!({ "words": words })).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreBody {
    word: String,
    hypothesis_ipa: String,
}

async fn score(State(svc): State<AppState>, body: Result<Json<ScoreBody>, JsonRejection>) -> ApiResult<Response> {
    let Json(req) = body?;
    Ok(Json(svc.score(&req.word, &req.hypothesis_ipa)?).into_response())
}

// ---- analytics ----

#[derive(Debug, Default, Deserialize)]
struct RangeQuery {
    from: Option<Timestamp>,
    to: Option<Timestamp>,
    word: Option<String>,
    band: Option<QualityBand>,
    session: Option<String>,
}

impl RangeQuery {
    fn range(&self) -> TimeRange {
        TimeRange {
            from: self.from,
            to: self.to,
        }
    }
}

async fn dashboard(
    State(svc): State<AppState>,
    Path(child): Path<String>,
    q: Result<Query<RangeQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = q?;
    Ok(Json(blocking(&svc, move |s| s.dashboard(&child, q.range())).await?).into_response())
}

async fn cards(
    State(svc): State<AppState>,
    Path(child): Path<String>,
    q: Result<Query<RangeQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = q?;
    let filter = CardFilter {
        word: q.word.clone(),
        band: q.band,
        session: q.session.clone(),
    };
    Ok(Json(blocking(&svc, move |s| s.cards(&child, &filter, q.range())).await?).into_response())
}

/// The report is returned exactly as `ProgressReport::to_json` renders it.
async fn report(
    State(svc): State<AppState>,
    Path(child): Path<String>,
    q: Result<Query<RangeQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = q?;
    let r = blocking(&svc, move |s| s.export(&child, q.range())).await?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], r.to_json()).into_response())
}
