use std::net::SocketAddr;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use uxpipe_core::harness::{run_session, EnvError, Environment, Message, Policy, PolicyError, PolicyRequest, Role, SessionConfig, SessionIds, Turn};
use uxpipe_core::trace::Termination;
use uxpipe_core::{Action, DefectPrinciple};
use uxpipe_net::{spawn_router, spawn_simserve, ChatConfig, ChatPolicy, HttpEnvironment};
use uxpipe_sim::{build_site, FlowFollower, SimEnvironment, Template, MAIN_FLOW};

fn any_port() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

fn cfg(budget: u32) -> SessionConfig {
    SessionConfig {
        budget,
        assess: false,
        date: Some("2025-01-01".into()),
        ..SessionConfig::default()
    }
}

#[test]
fn remote_simulated_site_matches_in_process_run() {
    let site = Arc::new(build_site(12, Template::Booking, Some((DefectPrinciple::Feedback, 1))).unwrap());
    let server = spawn_simserve(Arc::clone(&site), any_port()).unwrap();
    let ids = SessionIds {
        rollout_id: "r0".into(),
        site_id: site.site_id.clone(),
    };

    let mut remote = HttpEnvironment::new(server.base_url(), 10_000).unwrap();
    let mut policy = FlowFollower::new(Arc::clone(&site), MAIN_FLOW);
    let over_http = run_session(&mut remote, &mut policy, &cfg(30), &ids).unwrap();

    let mut local = SimEnvironment::new(Arc::clone(&site));
    let mut policy = FlowFollower::new(Arc::clone(&site), MAIN_FLOW);
    let in_process = run_session(&mut local, &mut policy, &cfg(30), &ids).unwrap();

    assert!(over_http.len() > 3);
    assert_eq!(over_http, in_process);
    server.shutdown();
}

#[test]
fn adapter_rejects_bad_actions() {
    let site = Arc::new(build_site(1, Template::Shop, None).unwrap());
    let server = spawn_simserve(site, any_port()).unwrap();
    let client = reqwest::blocking::Client::new();
    let url = format!("{}/act", server.base_url());
    let r = client.post(&url).json(&json!({"action": "Action: fly(1)"})).send().unwrap();
    assert_eq!(r.status().as_u16(), 422);
    let r = client.post(&url).body("not json").header("content-type", "application/json").send().unwrap();
    assert_eq!(r.status().as_u16(), 400);
    let r = client.post(&url).json(&json!({"action": "Action: scroll(down, 2)"})).send().unwrap();
    assert_eq!(r.status().as_u16(), 200);

    let mut env = HttpEnvironment::new(server.base_url(), 10_000).unwrap();
    assert!(matches!(env.apply(&Action::Stop), Err(EnvError::Rejected(_))));
    env.reset().unwrap();
    let shot = env.observe().unwrap();
    assert_eq!((shot.width(), shot.height()), (1920, 1080));
    assert_eq!(shot.captured_at_ms(), 0);
}

#[test]
fn unreachable_environment_ends_the_session() {
    let mut env = HttpEnvironment::new("http://127.0.0.1:9", 500).unwrap();
    let site = Arc::new(build_site(1, Template::Shop, None).unwrap());
    let mut policy = FlowFollower::new(site, MAIN_FLOW);
    let r = run_session(
        &mut env,
        &mut policy,
        &cfg(5),
        &SessionIds {
            rollout_id: "r".into(),
            site_id: "s".into(),
        },
    )
    .unwrap();
    assert_eq!(r.termination(), Some(Termination::EnvironmentError));
    assert!(r.is_empty());
}

#[derive(Clone)]
struct Mock {
    calls: Arc<AtomicU32>,
    fail_first: u32,
    status: StatusCode,
    last_body: Arc<std::sync::Mutex<Value>>,
}

async fn completions(State(m): State<Mock>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let n = m.calls.fetch_add(1, Ordering::SeqCst);
    *m.last_body.lock().unwrap() = body;
    if n < m.fail_first {
        return (m.status, Json(json!({"error": "busy"})));
    }
    (
        StatusCode::OK,
        Json(json!({"choices": [{"message": {"role": "assistant", "content": "Thought: done\nAction: stop()"}}]})),
    )
}

fn mock(fail_first: u32, status: StatusCode) -> (uxpipe_net::ServerHandle, Mock) {
    let m = Mock {
        calls: Arc::new(AtomicU32::new(0)),
        fail_first,
        status,
        last_body: Arc::new(std::sync::Mutex::new(Value::Null)),
    };
    let app = Router::new().route("/v1/chat/completions", post(completions)).with_state(m.clone());
    (spawn_router(app, any_port()).unwrap(), m)
}

fn chat(base_url: String, max_retries: u32) -> ChatPolicy {
    ChatPolicy::new(ChatConfig {
        base_url,
        model: "test-model".into(),
        timeout_ms: 5_000,
        max_retries,
        backoff_ms: 1,
        ..ChatConfig::default()
    })
    .unwrap()
}

fn request() -> PolicyRequest {
    PolicyRequest {
        turn: Turn::Step(1),
        attempt: 0,
        messages: vec![Message::text(Role::System, "s"), Message::text(Role::User, "u")],
    }
}

#[test]
fn transient_failures_are_retried() {
    let (server, m) = mock(2, StatusCode::SERVICE_UNAVAILABLE);
    let mut p = chat(server.base_url(), 3);
    assert_eq!(p.generate(&request()).unwrap(), "Thought: done\nAction: stop()");
    assert_eq!(m.calls.load(Ordering::SeqCst), 3);
    assert_eq!(m.last_body.lock().unwrap()["model"], "test-model");

    let (server, m) = mock(5, StatusCode::TOO_MANY_REQUESTS);
    let mut p = chat(server.base_url(), 1);
    assert!(matches!(p.generate(&request()), Err(PolicyError::Transport { attempts: 2, .. })));
    assert_eq!(m.calls.load(Ordering::SeqCst), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let (server, m) = mock(1, StatusCode::BAD_REQUEST);
    let mut p = chat(server.base_url(), 3);
    assert!(matches!(p.generate(&request()), Err(PolicyError::Transport { attempts: 1, .. })));
    assert_eq!(m.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_endpoint_exhausts_retries() {
    let mut p = chat("http://127.0.0.1:9".into(), 2);
    match p.generate(&request()) {
        Err(PolicyError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn sessions_run_against_the_remote_policy_concurrently() {
    let (server, m) = mock(0, StatusCode::OK);
    let p = chat(server.base_url(), 0);
    let site = Arc::new(build_site(2, Template::Jobs, None).unwrap());
    let handles: Vec<_> = (0..4)
        .map(|i| {
            let mut policy = p.clone();
            let site = Arc::clone(&site);
            std::thread::spawn(move || {
                let mut env = SimEnvironment::new(Arc::clone(&site));
                let ids = SessionIds {
                    rollout_id: format!("r{i}"),
                    site_id: site.site_id.clone(),
                };
                run_session(&mut env, &mut policy, &cfg(10), &ids).unwrap()
            })
        })
        .collect();
    for h in handles {
        let r = h.join().unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.termination(), Some(Termination::Stopped));
    }
    assert_eq!(m.calls.load(Ordering::SeqCst), 4);
    let body = m.last_body.lock().unwrap().clone();
    let parts = body["messages"][1]["content"].as_array().unwrap();
    assert_eq!(parts.iter().filter(|p| p["type"] == "image_url").count(), 1);
}
