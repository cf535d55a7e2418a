use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::HeaderMap;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{Stream, StreamExt};
use serde::Deserialize;
use serde_json::Value;
use tower_http::cors::CorsLayer;

use crate::engine::{EngineHandle, Request};
use crate::error::ApiError;
use crate::hub::EventHub;

#[derive(Clone)]
struct AppState {
    engine: EngineHandle,
    hub: Arc<EventHub>,
}

pub fn router(engine: EngineHandle, hub: Arc<EventHub>) -> Router {
    Router::new()
        .route("/api/state", get(state))
        .route("/api/plan", get(plan))
        .route("/api/session/start", post(start))
        .route("/api/session/abort", post(abort))
        .route("/api/calibration/{label}/start", post(calibration_start))
        .route("/api/calibration/{label}/stop", post(calibration_stop))
        .route("/api/events", get(events))
        .layer(CorsLayer::permissive())
        .with_state(AppState { engine, hub })
}

type ApiResult = Result<Json<Value>, ApiError>;

async fn state(State(s): State<AppState>) -> ApiResult {
    s.engine.request(Request::State).await.map(Json)
}

async fn plan(State(s): State<AppState>) -> ApiResult {
    s.engine.request(Request::Plan).await.map(Json)
}

async fn start(State(s): State<AppState>, body: String) -> ApiResult {
    s.engine.request(Request::StartSession(body)).await.map(Json)
}

async fn abort(State(s): State<AppState>) -> ApiResult {
    s.engine.request(Request::Abort).await.map(Json)
}

async fn calibration_start(State(s): State<AppState>, Path(label): Path<String>) -> ApiResult {
    s.engine.request(Request::CalibrationStart(label)).await.map(Json)
}

async fn calibration_stop(State(s): State<AppState>, Path(label): Path<String>) -> ApiResult {
    s.engine.request(Request::CalibrationStop(label)).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    last_seq: Option<u64>,
}

/// Resume point: the `Last-Event-ID` header wins over `?last_seq=`.
fn resume_after(headers: &HeaderMap, query: &EventsQuery) -> Result<u64, ApiError> {
    match headers.get("last-event-id") {
        Some(v) => v
            .to_str()
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| ApiError::bad_request("bad_last_event_id", "Last-Event-ID must be a sequence number")),
        None => Ok(query.last_seq.unwrap_or(0)),
    }
}

async fn events(
    State(s): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<EventsQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let after = resume_after(&headers, &q)?;
    let stream = s.hub.subscribe(after).map(|ev| {
        let data = serde_json::to_string(&ev).expect("wire events serialize");
        Ok(Event::default().id(ev.seq.to_string()).data(data))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
