use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::{Decision, DecisionRequest, ReviewError, ReviewService};

const DEFAULT_LIMIT: usize = 50;

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let status = match &self {
            ReviewError::UnknownItem(_) => StatusCode::NOT_FOUND,
            ReviewError::Conflict { .. } | ReviewError::KeyReuse(_) => StatusCode::CONFLICT,
            ReviewError::BadRequest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.to_string() });
        if let ReviewError::Conflict { current, .. } = &self {
            body["current"] = json!(current);
        }
        (status, Json(body)).into_response()
    }
}

type Shared = State<Arc<ReviewService>>;

#[derive(Debug, Deserialize)]
struct QueueQuery {
    status: Option<String>,
    limit: Option<usize>,
}

fn parse_status(raw: Option<&str>) -> Result<Option<Decision>, ReviewError> {
    match raw.unwrap_or("pending") {
        "all" => Ok(None),
        other => serde_json::from_value(json!(other))
            .map(Some)
            .map_err(|_| ReviewError::BadRequest(format!("unknown status {other:?}"))),
    }
}

async fn queue(State(svc): Shared, Query(q): Query<QueueQuery>) -> Result<Response, ReviewError> {
    let status = parse_status(q.status.as_deref())?;
    let limit = q.limit.unwrap_or(DEFAULT_LIMIT);
    let body = svc.read(|s| {
        let items = s.queue(status, limit);
        let matching = s
            .items()
            .iter()
            .filter(|it| status.is_none_or(|d| it.decision == d))
            .count();
        json!({ "items": items, "matching": matching })
    });
    Ok(Json(body).into_response())
}

async fn item(State(svc): Shared, Path(id): Path<String>) -> Result<Response, ReviewError> {
    svc.read(|s| s.view(&id))
        .map(|v| Json(v).into_response())
        .ok_or(ReviewError::UnknownItem(id))
}

async fn decision(
    State(svc): Shared,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<Response, ReviewError> {
    let Json(req) = body.map_err(|e| ReviewError::BadRequest(e.body_text()))?;
    let svc = svc.clone();
    let out = tokio::task::spawn_blocking(move || svc.decide(req))
        .await
        .map_err(|e| ReviewError::BadRequest(e.to_string()))??;
    Ok(Json(out).into_response())
}

async fn stats(State(svc): Shared) -> Response {
    Json(svc.read(|s| s.stats())).into_response()
}

async fn export(State(svc): Shared) -> Result<Response, ReviewError> {
    let records = svc.read(|s| s.accepted_records());
    let mut body = Vec::new();
    semtag_core::jsonl::write_to(&mut body, &records)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

pub fn router(service: Arc<ReviewService>) -> Router {
    Router::new()
        .route("/api/queue", get(queue))
        .route("/api/item/{id}", get(item))
        .route("/api/decision", post(decision))
        .route("/api/stats", get(stats))
        .route("/api/export", get(export))
        .with_state(service)
}
