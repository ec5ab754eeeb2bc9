//! HTTP front end for [`ChatService`].
//!
//! Routes: `POST /session`, `GET /session/{id}`, `POST /session/{id}/message`,
//! `POST /survey`, `GET /summary`, `GET /export`, `GET /health`. Errors come
//! back as `{"error": "..."}` with a 4xx/5xx status.

mod config;

use std::net::SocketAddr;
use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub use config::{ServerConfig, ENV_DATA_DIR, ENV_PORT};
use sentibucket_core::bots::BotEnsemble;
use sentibucket_core::bucket::GatingConfig;
use sentibucket_core::classifiers::{load_model_file, ModelKind, SentimentClassifier};
use sentibucket_core::eval::Arm;
use sentibucket_core::service::{render_export, ChatService, ExportFilter, ServiceError, SurveyInput};

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<ChatService>,
    pub model_kind: ModelKind,
}

/// Load every artifact named in `cfg` and open the record log. Any missing
/// or unreadable file is an error here, not at the first request.
pub fn build_state(cfg: &ServerConfig) -> anyhow::Result<AppState> {
    let model_path = cfg.model.as_ref().context("no model artifact configured")?;
    let model = load_model_file(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    let bots = match &cfg.bots_dir {
        Some(dir) => BotEnsemble::load_dir(dir).with_context(|| format!("loading bots from {}", dir.display()))?,
        None => BotEnsemble::shipped(),
    };
    let gating = match &cfg.gating {
        Some(p) => GatingConfig::load(p).with_context(|| format!("loading gating config {}", p.display()))?,
        None => GatingConfig::default(),
    };
    if let Some(dir) = &cfg.static_dir {
        anyhow::ensure!(dir.is_dir(), "static directory {} not found", dir.display());
    }
    let model_kind = model.kind();
    let model: Arc<dyn SentimentClassifier> = Arc::new(model);
    let service = ChatService::open(&cfg.data_dir, model, bots, gating, cfg.seed)
        .with_context(|| format!("opening data directory {}", cfg.data_dir.display()))?;
    Ok(AppState {
        service: Arc::new(service),
        model_kind,
    })
}

pub fn router(state: AppState, static_dir: Option<&std::path::Path>) -> Router {
    let api = Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/message", post(post_message))
        .route("/survey", post(submit_survey))
        .route("/summary", get(summary))
        .route("/export", get(export))
        .route("/health", get(health))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(cfg: ServerConfig) -> anyhow::Result<()> {
    let state = build_state(&cfg)?;
    let addr: SocketAddr = format!("{}:{}", cfg.host, cfg.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", cfg.host, cfg.port))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!(%addr, data_dir = %cfg.data_dir.display(), "listening");
    axum::serve(listener, router(state, cfg.static_dir.as_deref()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

pub struct ApiError(StatusCode, String);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

/// Parse a JSON body ourselves so malformed input gets the same error shape.
fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    arm: Option<Arm>,
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        parse_body(&body)?
    };
    let info = blocking(move || st.service.create_session(req.arm)).await?;
    Ok((StatusCode::CREATED, Json(info)))
}

#[derive(Debug, Serialize)]
struct TranscriptTurn {
    turn_index: u64,
    user_text: String,
    final_text: String,
}

/// What a client may see of a session: no arm, no decisions.
#[derive(Debug, Serialize)]
struct SessionView {
    session_id: String,
    display_name: String,
    created_at: String,
    turns: Vec<TranscriptTurn>,
    survey_submitted: bool,
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let s = st.service.get_session(&id)?;
    Ok(Json(SessionView {
        session_id: s.session_id,
        display_name: s.display_name,
        created_at: s.created_at,
        turns: s
            .turns
            .into_iter()
            .map(|t| TranscriptTurn {
                turn_index: t.turn,
                user_text: t.user_text,
                final_text: t.final_text,
            })
            .collect(),
        survey_submitted: s.survey.is_some(),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostMessage {
    text: String,
}

async fn post_message(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: PostMessage = parse_body(&body)?;
    let reply = blocking(move || st.service.post_message(&id, &req.text)).await?;
    Ok(Json(reply))
}

#[derive(Debug, Serialize)]
struct SurveyAck {
    session_id: String,
    revision: u32,
    submitted_at: String,
}

async fn submit_survey(State(st): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let input: SurveyInput = parse_body(&body)?;
    let session_id = input.session_id.clone();
    let survey = blocking(move || st.service.submit_survey(&input)).await?;
    Ok(Json(SurveyAck {
        session_id,
        revision: survey.revision,
        submitted_at: survey.submitted_at,
    }))
}

async fn summary(State(st): State<AppState>) -> impl IntoResponse {
    Json(st.service.summary())
}

#[derive(Debug, Default, Deserialize)]
struct ExportQuery {
    arm: Option<Arm>,
    #[serde(default)]
    surveyed: bool,
}

async fn export(State(st): State<AppState>, Query(q): Query<ExportQuery>) -> impl IntoResponse {
    let records = st.service.export(ExportFilter {
        arm: q.arm,
        surveyed_only: q.surveyed,
    });
    ([(header::CONTENT_TYPE, "application/x-ndjson")], render_export(&records))
}

async fn health(State(st): State<AppState>) -> impl IntoResponse {
    Json(serde_json::json!({
        "status": "ok",
        "model": st.model_kind.as_str(),
        "sessions": st.service.summary().sessions.values().sum::<usize>(),
    }))
}
