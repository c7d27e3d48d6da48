use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use mcda_mss::Selection;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::api::{ApiError, Service, DEFAULT_SELECTIVE_K};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(json!({ "error": self }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = State<Arc<Service>>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answers/{*question}", put(put_answer))
        .route("/sessions/{id}/binding-search", post(binding_search))
        .route("/sessions/{id}/selective-questions", get(selective_questions))
        .route("/audit", post(audit))
        .route("/taxonomy", get(taxonomy))
        .route("/methods", get(methods))
        .route("/methods/{id}", get(method))
        .fallback(|| async { ApiError::new(404, "not_found", "no such route") })
        .method_not_allowed_fallback(|| async { ApiError::new(405, "method_not_allowed", "method not allowed on this route") })
        .with_state(service)
}

/// Service calls touch the disk, so they run off the async workers.
async fn blocking<T: Send + 'static>(
    svc: Arc<Service>,
    f: impl FnOnce(&Service) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .unwrap_or_else(|e| Err(ApiError::new(500, "internal", e.to_string())))
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(400, "invalid_json", e.to_string()))
}

async fn create_session(State(svc): Shared) -> ApiResult<Response> {
    let state = blocking(svc, |s| s.create_session()).await?;
    let location = format!("/sessions/{}", state.id);
    Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(state)).into_response())
}

async fn get_session(State(svc): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |s| s.get_state(&id)).await?))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SelectionBody {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    revision: u64,
    selection: Option<SelectionBody>,
}

async fn put_answer(State(svc): Shared, Path((id, question)): Path<(String, String)>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let raw: Value = parse_json(&body)?;
    if raw.get("selection").is_none() {
        return Err(ApiError::new(400, "invalid_body", "`selection` is required; use null to clear the answer").with_field("selection"));
    }
    let body: AnswerBody = serde_json::from_value(raw).map_err(|e| ApiError::new(400, "invalid_body", e.to_string()))?;
    let selection = match body.selection {
        None => Selection::Clear,
        Some(SelectionBody::One(k)) => Selection::Set(vec![k]),
        Some(SelectionBody::Many(ks)) => Selection::Set(ks),
    };
    Ok(Json(blocking(svc, move |s| s.submit_answer(&id, body.revision, &question, &selection)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BindingBody {
    #[serde(default)]
    binding: Vec<String>,
    limit: Option<usize>,
}

async fn binding_search(State(svc): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let body: BindingBody = parse_json(&body)?;
    Ok(Json(blocking(svc, move |s| s.binding_search(&id, &body.binding, body.limit)).await?))
}

#[derive(Serialize)]
struct SelectiveResponse {
    questions: Vec<crate::api::SelectiveEntry>,
}

async fn selective_questions(
    State(svc): Shared,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    let k = match q.get("k") {
        None => DEFAULT_SELECTIVE_K,
        Some(v) => v
            .parse()
            .map_err(|_| ApiError::new(400, "invalid_query", format!("k must be a non-negative integer, got `{v}`")).with_field("k"))?,
    };
    let questions = blocking(svc, move |s| s.selective_questions(&id, k)).await?;
    Ok(Json(SelectiveResponse { questions }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AuditBody {
    case: String,
}

/// Accepts the case file as a plain-text body or as `{"case": "..."}`.
async fn audit(State(svc): Shared, headers: HeaderMap, body: Bytes) -> ApiResult<impl IntoResponse> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let text = if is_json {
        parse_json::<AuditBody>(&body)?.case
    } else {
        String::from_utf8(body.to_vec()).map_err(|_| ApiError::new(400, "invalid_body", "case text must be UTF-8"))?
    };
    Ok(Json(blocking(svc, move |s| s.run_audit(&text)).await?))
}

async fn taxonomy(State(svc): Shared) -> impl IntoResponse {
    Json(svc.taxonomy())
}

async fn methods(State(svc): Shared) -> impl IntoResponse {
    Json(json!({ "methods": svc.methods() }))
}

async fn method(State(svc): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(svc.method(&id)?).into_response())
}
