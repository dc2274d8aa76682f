//! Local HTTP API over the synthesis pipeline.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use crate::dictionary::Dictionary;
use crate::intent::{build_script, Classifier, IntentError};
use crate::script::{GestureScript, WordTiming};
use crate::synth::{synthesize, BaseGestureSpec, ScheduleMode, SynthError, SynthesisConfig};

#[derive(Clone)]
pub struct AppState {
    pub dictionary: Arc<Dictionary>,
    pub classifier: Arc<Classifier>,
    pub defaults: SynthesisConfig,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<IntentError> for ApiError {
    fn from(e: IntentError) -> Self {
        match e {
            IntentError::Transport(_) => Self::new(StatusCode::BAD_GATEWAY, e.to_string()),
            IntentError::Cache { .. } => Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
            other => Self::bad_request(other.to_string()),
        }
    }
}

impl From<SynthError> for ApiError {
    fn from(e: SynthError) -> Self {
        Self::bad_request(e.to_string())
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParseRequest {
    text: String,
    timings: Vec<WordTiming>,
}

async fn parse(State(state): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: ParseRequest = parse_body(&body)?;
    let classifier = state.classifier.clone();
    let (script, provenance) = blocking(move || Ok(build_script(&req.text, &req.timings, &classifier)?)).await?;
    Ok(Json(json!({ "script": script, "provenance": provenance })))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SynthOptions {
    mode: Option<ScheduleMode>,
    seed: Option<u64>,
    ramp_s: Option<f64>,
    min_gesture_s: Option<f64>,
    base: Option<BaseGestureSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthRequest {
    script: Value,
    #[serde(default)]
    options: SynthOptions,
}

async fn synth(State(state): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: SynthRequest = parse_body(&body)?;
    let script = GestureScript::from_value(req.script).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let o = req.options;
    let base = o.base.unwrap_or(BaseGestureSpec::RestPose);
    if matches!(base, BaseGestureSpec::File { .. }) {
        return Err(ApiError::bad_request("file bases are not accepted over http"));
    }
    let d = state.defaults;
    let config = SynthesisConfig {
        mode: o.mode.unwrap_or(d.mode),
        seed: o.seed.unwrap_or(d.seed),
        ramp_s: o.ramp_s.unwrap_or(d.ramp_s),
        min_gesture_s: o.min_gesture_s.unwrap_or(d.min_gesture_s),
        ..d
    };
    let dict = state.dictionary.clone();
    let out = blocking(move || Ok(synthesize(&script, &dict, &base, &config)?)).await?;
    Ok(Json(json!({
        "motion": out.motion.to_value(),
        "schedule": out.schedule,
        "report": out.report,
        "report_text": out.report.to_text(),
        "script": out.script,
    })))
}

async fn dictionary(State(state): State<AppState>) -> Json<Value> {
    Json(serde_json::to_value(state.dictionary.manifest()).expect("manifest serializes"))
}

async fn unit(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let manifest = state.dictionary.manifest();
    let entry = manifest
        .units
        .iter()
        .find(|u| u.id == id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown unit {id}")))?;
    let unit = state.dictionary.unit(&id).expect("manifest and units agree");
    Ok(Json(json!({ "unit": entry, "motion": unit.clip.to_value() })))
}

async fn health() -> &'static str {
    "ok"
}

/// Builds the API router. `cors_origin` enables cross-origin access for a
/// single origin.
pub fn router(state: AppState, cors_origin: Option<&str>) -> Result<Router, String> {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/parse", post(parse))
        .route("/api/synthesize", post(synth))
        .route("/api/dictionary", get(dictionary))
        .route("/api/units/{id}", get(unit))
        .with_state(state);
    if let Some(origin) = cors_origin {
        let origin = HeaderValue::from_str(origin).map_err(|e| format!("invalid cors origin {origin:?}: {e}"))?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
                .allow_headers([axum::http::header::CONTENT_TYPE]),
        );
    }
    Ok(app)
}

pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await
}
