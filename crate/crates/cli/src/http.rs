//! HTTP transport for [`OperatorService`]. Every body is JSON with a
//! `schema` field; the delta stream is served as server-sent events.

use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::json;
use uatm_core::domain::{AgentId, Leg, VertiportId};
use uatm_core::service::{CommandResult, OperatorService, WIRE_SCHEMA};
use uatm_core::ServiceError;

type Shared = Arc<OperatorService>;

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/api/network", get(network))
        .route("/api/state", get(state))
        .route("/api/close", post(close))
        .route("/api/reopen", post(reopen))
        .route("/api/landing-request", post(landing_request))
        .route("/api/advance", post(advance))
        .route("/api/reset", post(reset))
        .route("/api/explain", get(explain))
        .route("/api/transcript", get(transcript))
        .route("/api/events", get(events))
        .with_state(service)
}

fn error(e: &ServiceError) -> Response {
    let status = match e {
        ServiceError::NoSession => StatusCode::CONFLICT,
        ServiceError::BadAtom { .. } => StatusCode::BAD_REQUEST,
        e if e.is_not_in_model() => StatusCode::NOT_FOUND,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    (status, Json(json!({ "schema": WIRE_SCHEMA, "error": e.to_string() }))).into_response()
}

fn command(result: CommandResult) -> Response {
    let status = if result.accepted {
        StatusCode::OK
    } else {
        StatusCode::UNPROCESSABLE_ENTITY
    };
    (status, Json(result)).into_response()
}

/// Commands may solve for a while; keep them off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("command task panicked")
}

async fn network(State(s): State<Shared>) -> Response {
    match s.network() {
        Ok(doc) => Json(&*doc).into_response(),
        Err(e) => error(&e),
    }
}

async fn state(State(s): State<Shared>) -> Response {
    match s.state() {
        Ok(snap) => Json(&*snap).into_response(),
        Err(e) => error(&e),
    }
}

#[derive(Deserialize)]
struct VertiportBody {
    vertiport: VertiportId,
}

#[derive(Deserialize)]
struct LandingBody {
    agent: AgentId,
    corridor: Leg,
    waypoint: i64,
}

async fn close(State(s): State<Shared>, Json(b): Json<VertiportBody>) -> Response {
    command(blocking(move || s.close(b.vertiport)).await)
}

async fn reopen(State(s): State<Shared>, Json(b): Json<VertiportBody>) -> Response {
    command(blocking(move || s.reopen(b.vertiport)).await)
}

async fn landing_request(State(s): State<Shared>, Json(b): Json<LandingBody>) -> Response {
    command(blocking(move || s.landing_request(b.agent, b.corridor, b.waypoint)).await)
}

async fn advance(State(s): State<Shared>) -> Response {
    command(blocking(move || s.advance()).await)
}

async fn reset(State(s): State<Shared>) -> Response {
    match blocking(move || s.reset()).await {
        Ok(snap) => Json(snap).into_response(),
        Err(e) => error(&e),
    }
}

#[derive(Deserialize)]
struct ExplainQuery {
    atom: String,
}

async fn explain(State(s): State<Shared>, Query(q): Query<ExplainQuery>) -> Response {
    match blocking(move || s.explain(&q.atom)).await {
        Ok(e) => Json(e).into_response(),
        Err(e) => error(&e),
    }
}

async fn transcript(State(s): State<Shared>) -> Response {
    match s.transcript_jsonl() {
        Ok(text) => ([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response(),
        Err(e) => error(&e),
    }
}

async fn events(State(s): State<Shared>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = s.subscribe();
    let stream = stream::unfold(rx, |mut rx| async move {
        let delta = rx.recv().await?;
        let event = Event::default()
            .event("delta")
            .id(delta.seq.to_string())
            .json_data(&delta)
            .expect("deltas serialize");
        Some((Ok(event), rx))
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}
