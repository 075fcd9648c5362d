//! HTTP/JSON front end for the localization library.
//!
//! Every compute endpoint takes a JSON body, runs on the blocking pool and
//! answers with the matching response type from `irsloc_core::api`. Errors
//! come back as an [`ApiError`] body with a 4xx/5xx status.

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use irsloc_core::api::{self, ApiError};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

/// Error response: status from the error kind, body is the error itself.
#[derive(Debug)]
pub struct Failure(pub ApiError);

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0)).into_response()
    }
}

fn parse<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, Failure> {
    if body.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| Failure(ApiError { kind: "parse".into(), message: format!("request body: {e}") }))
}

/// Runs `f` off the async workers and maps library errors to responses.
async fn blocking<T, F>(f: F) -> Result<Json<T>, Failure>
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> irsloc_core::Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(v)) => Ok(Json(v)),
        Ok(Err(e)) => Err(Failure(e.into())),
        Err(e) => Err(Failure(ApiError { kind: "internal".into(), message: format!("worker failed: {e}") })),
    }
}

async fn health() -> &'static str {
    "ok"
}

async fn scenarios() -> Json<Vec<api::ScenarioInfo>> {
    Json(api::scenarios())
}

async fn crb(body: Bytes) -> Result<Json<api::CrbResponse>, Failure> {
    let req: api::CrbRequest = parse(&body)?;
    blocking(move || api::crb(req)).await
}

async fn angles(body: Bytes) -> Result<Json<api::AnglesResponse>, Failure> {
    let req: api::AnglesRequest = parse(&body)?;
    blocking(move || api::angles(req)).await
}

async fn localize(body: Bytes) -> Result<Json<api::LocalizeResponse>, Failure> {
    let req: api::LocalizeRequest = parse(&body)?;
    blocking(move || api::localize_scene(req)).await
}

async fn experiments(body: Bytes) -> Result<Json<api::ExperimentResponse>, Failure> {
    let req: api::ExperimentRequest = parse(&body)?;
    tracing::info!(scenario = %req.scenario, "experiment requested");
    blocking(move || api::experiment(req)).await
}

pub fn router() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/scenarios", get(scenarios))
        .route("/v1/crb", post(crb))
        .route("/v1/angles", post(angles))
        .route("/v1/localize", post(localize))
        .route("/v1/experiments", post(experiments))
}

/// Serves on an already bound listener until the task is dropped or aborted.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}

/// Binds `addr` (port 0 picks a free one) and serves in the background.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    tracing::info!(%bound, "listening");
    Ok((bound, tokio::spawn(serve(listener))))
}
