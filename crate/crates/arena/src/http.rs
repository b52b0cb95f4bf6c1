//! JSON API over an [`Arena`] plus static site bundles under `/sites`.

use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::stats::{rating_stats, RatingStats};
use crate::store::{Arena, Vote};
use crate::ArenaError;

/// Rater instructions returned with every pair.
pub const INSTRUCTIONS: [&str; 8] = [
    "You will be shown 30 pairs of websites.",
    "Your task is to evaluate which website between pairs of websites is more usable.",
    "These websites are clones of existing websites so many of the images are text placeholders. When voting, ensure you are evaluating the sites based on their usability.",
    "Occasionally websites may take awhile to load or may not reload. If that is the case feel free to move on.",
    "You must expand both websites using the expand (↔) button before you can vote.",
    "Browse each site freely — scroll, click links, and explore as you normally would.",
    "DO NOT enter in any personal information during your exploration. Instead, you can provide with fake information such as \"John Doe, 123@demo.com, 123-456-7890\"",
    "While you can choose ties, try and select one website over the other. There are no right or wrong answers — go with your honest impression.",
];

pub type SharedArena = Arc<Mutex<Arena>>;

fn lock(arena: &SharedArena) -> MutexGuard<'_, Arena> {
    arena.lock().unwrap_or_else(|p| p.into_inner())
}

fn status(err: &ArenaError) -> StatusCode {
    match err {
        ArenaError::DuplicateVote { .. } => StatusCode::CONFLICT,
        ArenaError::PoolExhausted { .. } => StatusCode::SERVICE_UNAVAILABLE,
        ArenaError::Io(_) | ArenaError::Log(_) | ArenaError::DuplicatePairId(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn error(code: StatusCode, kind: &str, message: String) -> Response {
    (code, Json(json!({"error": kind, "message": message}))).into_response()
}

fn arena_error(err: ArenaError) -> Response {
    error(status(&err), err.kind(), err.to_string())
}

#[derive(Debug, Default, Deserialize)]
struct SessionBody {
    participant: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_id: String,
    pub pair_ids: Vec<String>,
}

async fn create_session(State(arena): State<SharedArena>, body: Option<Json<SessionBody>>) -> Response {
    let participant = body.and_then(|Json(b)| b.participant);
    match lock(&arena).create_session(participant) {
        Ok(s) => Json(SessionResponse {
            session_id: s.session_id.clone(),
            pair_ids: s.pair_ids(),
        })
        .into_response(),
        Err(e) => arena_error(e),
    }
}

async fn get_session(State(arena): State<SharedArena>, UrlPath(id): UrlPath<String>) -> Response {
    let arena = lock(&arena);
    let Some(s) = arena.session(&id) else {
        return error(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"));
    };
    let voted: Vec<&str> = s
        .pairs
        .iter()
        .filter(|p| arena.has_voted(&id, &p.pair_id))
        .map(|p| p.pair_id.as_str())
        .collect();
    Json(json!({
        "session_id": s.session_id,
        "pair_ids": s.pair_ids(),
        "voted": voted,
        "complete": voted.len() == s.pairs.len(),
    }))
    .into_response()
}

#[derive(Debug, Deserialize)]
struct PairQuery {
    session: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairResponse {
    pub pair_id: String,
    pub left_url: String,
    pub right_url: String,
    pub instructions: Vec<String>,
}

fn site_url(site_id: &str) -> String {
    format!("/sites/{site_id}/")
}

async fn get_pair(State(arena): State<SharedArena>, UrlPath(id): UrlPath<String>, Query(q): Query<PairQuery>) -> Response {
    let arena = lock(&arena);
    let Some(pair) = arena.pair(&id) else {
        return error(StatusCode::NOT_FOUND, "unknown_pair", format!("no pair `{id}`"));
    };
    let swapped = match &q.session {
        None => false,
        Some(sid) => match arena.session(sid) {
            None => return arena_error(ArenaError::UnknownSession(sid.clone())),
            Some(s) => match s.assigned(&id) {
                None => {
                    return arena_error(ArenaError::NotAssigned {
                        session_id: sid.clone(),
                        pair_id: id,
                    })
                }
                Some(a) => a.swapped,
            },
        },
    };
    let (left, right) = if swapped {
        (&pair.right_site, &pair.left_site)
    } else {
        (&pair.left_site, &pair.right_site)
    };
    Json(PairResponse {
        pair_id: pair.pair_id.clone(),
        left_url: site_url(left),
        right_url: site_url(right),
        instructions: INSTRUCTIONS.iter().map(|s| s.to_string()).collect(),
    })
    .into_response()
}

async fn post_vote(State(arena): State<SharedArena>, body: Result<Json<Vote>, JsonRejection>) -> Response {
    let vote = match body {
        Ok(Json(v)) => v,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.body_text()),
    };
    match lock(&arena).record_vote(vote) {
        Ok(_) => Json(json!({"status": "ok"})).into_response(),
        Err(e) => arena_error(e),
    }
}

async fn get_stats(State(arena): State<SharedArena>) -> Json<RatingStats> {
    Json(rating_stats(lock(&arena).votes()))
}

/// API routes, with `sites_dir` (holding one directory per site id) mounted
/// at `/sites` when given.
pub fn router(arena: SharedArena, sites_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(get_session))
        .route("/api/pair/{id}", get(get_pair))
        .route("/api/vote", post(post_vote))
        .route("/api/stats", get(get_stats))
        .with_state(arena);
    match sites_dir {
        Some(dir) => api.nest_service("/sites", ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api,
    }
}
