//! HTTP server exposing a simulated site through the environment adapter protocol.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::oneshot;
use uxpipe_core::action::parse_call;
use uxpipe_core::harness::{EnvError, Environment};
use uxpipe_sim::{SimEnvironment, SimSite};

use crate::envclient::CAPTURED_AT_HEADER;

type Shared = Arc<Mutex<SimEnvironment>>;

#[derive(Deserialize)]
struct ActBody {
    action: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({"error": msg.into()}))).into_response()
}

fn env_error(e: EnvError) -> Response {
    match e {
        EnvError::Rejected(m) => error(StatusCode::UNPROCESSABLE_ENTITY, m),
        other => error(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    }
}

async fn observe(State(env): State<Shared>) -> Response {
    let shot = {
        let mut env = env.lock().expect("environment lock");
        env.observe()
    };
    match shot {
        Ok(shot) => {
            let mut resp = (StatusCode::OK, Bytes::from(shot.to_png())).into_response();
            let headers = resp.headers_mut();
            headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
            headers.insert(CAPTURED_AT_HEADER, HeaderValue::from(shot.captured_at_ms()));
            resp
        }
        Err(e) => env_error(e),
    }
}

async fn act(State(env): State<Shared>, body: Result<Json<ActBody>, axum::extract::rejection::JsonRejection>) -> Response {
    let Ok(Json(body)) = body else {
        return error(StatusCode::BAD_REQUEST, "expected {\"action\": \"<action line>\"}");
    };
    let action = match parse_call(&body.action) {
        Ok(a) => a,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    };
    let mut env = env.lock().expect("environment lock");
    match env.step(&action) {
        Ok(outcome) => (StatusCode::OK, Json(json!({"ok": true, "outcome": format!("{outcome:?}")}))).into_response(),
        Err(e) => env_error(e),
    }
}

async fn reset(State(env): State<Shared>) -> Response {
    let mut env = env.lock().expect("environment lock");
    match env.reset() {
        Ok(()) => (StatusCode::OK, Json(json!({"ok": true}))).into_response(),
        Err(e) => env_error(e),
    }
}

async fn site_info(State(env): State<Shared>) -> Response {
    let env = env.lock().expect("environment lock");
    let site = env.site();
    Json(json!({
        "site_id": site.site_id,
        "template": site.template,
        "nodes": site.nodes.len(),
        "defect": site.defect.as_ref().map(|d| d.principle),
    }))
    .into_response()
}

pub fn router(site: Arc<SimSite>) -> Router {
    let env: Shared = Arc::new(Mutex::new(SimEnvironment::new(site)));
    Router::new()
        .route("/observe", get(observe))
        .route("/act", post(act))
        .route("/reset", post(reset))
        .route("/site", get(site_info))
        .with_state(env)
}

/// Serve until the process ends.
pub async fn serve(listener: tokio::net::TcpListener, site: Arc<SimSite>) -> std::io::Result<()> {
    axum::serve(listener, router(site)).await
}

/// A server running on its own thread; dropped or `shutdown` stops it.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

/// Run `app` on a background thread bound to `addr` (port 0 picks a free port).
pub fn spawn_router(app: Router, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let bound = std_listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new().name(format!("http-{bound}")).spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .expect("tokio runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    })?;
    Ok(ServerHandle {
        addr: bound,
        stop: Some(tx),
        thread: Some(thread),
    })
}

pub fn spawn_simserve(site: Arc<SimSite>, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    spawn_router(router(site), addr)
}
