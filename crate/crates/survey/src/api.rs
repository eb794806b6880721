use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Result, ServiceError};
use crate::service::Service;
use crate::session::AnswerRequest;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status() >= 500 {
            tracing::error!(error = %self, "request failed");
        }
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_step))
        .route("/sessions/{id}/answers", post(submit_answer))
        .route("/sessions/{id}/status", get(status))
        .route("/export", get(export))
        .with_state(service)
}

/// Serve until interrupted.
pub async fn serve(service: Arc<Service>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "survey service listening");
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    value.strip_prefix("Bearer ").map(|t| t.trim().to_string())
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid request body: {e}")))
}

/// Run a service call off the async workers; robust queries may need
/// thousands of linear programs on a lookup miss.
async fn blocking<T, F>(status: StatusCode, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(body)) => (status, Json(body)).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ServiceError::Storage(format!("worker task failed: {e}")).into_response(),
    }
}

async fn health(State(service): State<Arc<Service>>) -> Response {
    Json(service.health()).into_response()
}

async fn create_session(State(service): State<Arc<Service>>, body: Bytes) -> Response {
    match parse(&body) {
        Ok(request) => blocking(StatusCode::CREATED, move || service.create_session(request)).await,
        Err(e) => e.into_response(),
    }
}

async fn next_step(State(service): State<Arc<Service>>, Path(id): Path<String>, headers: HeaderMap) -> Response {
    let token = bearer(&headers);
    blocking(StatusCode::OK, move || service.next_step(&id, token.as_deref())).await
}

async fn submit_answer(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let token = bearer(&headers);
    match parse::<AnswerRequest>(&body) {
        Ok(answer) => blocking(StatusCode::OK, move || service.submit_answer(&id, token.as_deref(), &answer)).await,
        Err(e) => e.into_response(),
    }
}

async fn status(State(service): State<Arc<Service>>, Path(id): Path<String>, headers: HeaderMap) -> Response {
    let token = bearer(&headers);
    blocking(StatusCode::OK, move || service.status(&id, token.as_deref())).await
}

async fn export(State(service): State<Arc<Service>>, headers: HeaderMap) -> Response {
    let token = bearer(&headers);
    match tokio::task::spawn_blocking(move || service.export(token.as_deref())).await {
        Ok(Ok(body)) => ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ServiceError::Storage(format!("worker task failed: {e}")).into_response(),
    }
}
