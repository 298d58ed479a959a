use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use geoframe::audit::AuditLog;
use geoframe::interpret::{Interpreter, RemoteBackend, RemoteConfig, EXAMPLE_QUERY};
use geoframe::pipeline::Engine;
use geoframe::service::{router, serve, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn state() -> Arc<AppState> {
    Arc::new(AppState {
        engine: Engine::fixture(1),
        audit: AuditLog::memory(),
    })
}

async fn call(st: &Arc<AppState>, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(path).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(st.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn health_and_metadata() {
    let st = state();
    let (s, v) = call(&st, "GET", "/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["dataset_version"], st.engine.dataset_version());
    let (s, v) = call(&st, "GET", "/dataset/version", None).await;
    assert_eq!((s, v["dataset_version"].as_str()), (StatusCode::OK, Some(st.engine.dataset_version())));
    let (s, v) = call(&st, "GET", "/registry", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["entity"].as_array().map(Vec::len), Some(6), "{v}");
}

#[tokio::test]
async fn ranking_query_returns_five_rows() {
    let st = state();
    let (s, v) = call(&st, "POST", "/query", Some(json!({"text": EXAMPLE_QUERY}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["table"]["rows"].as_array().unwrap().len(), 5);
    assert_eq!(v["map"]["type"], "FeatureCollection");
    assert!(v["repair_report"]["actions"].as_array().is_some_and(|a| !a.is_empty()));
    assert!(v["graph_audit_text"].as_str().is_some_and(|t| t.contains("rank")));
    assert!(v["nl_summary"].as_str().unwrap().starts_with("Ranking the top 5 School"));
}

#[tokio::test]
async fn ambiguity_round_trip() {
    let st = state();
    let (s, v) = call(&st, "POST", "/query", Some(json!({"text": "show crashes near Main School"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "ambiguous_anchor");
    assert_eq!(v["error"]["candidates"].as_array().unwrap().len(), 2);
    assert!(v["repair_report"].is_object());
    let (s, v) = call(&st, "POST", "/query", Some(json!({"text": "show crashes near Main School", "anchor_pick": 1}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
}

#[tokio::test]
async fn staged_endpoints_chain() {
    let st = state();
    let (s, v) = call(&st, "POST", "/interpret", Some(json!({"text": "show cyclists crashes in Quincy"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let raw = v["raw_frame"].clone();

    // the raw frame still says "cyclists"
    let (s, v) = call(&st, "POST", "/execute", Some(json!({"frame": raw}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["error"]["code"], "invalid_frame");

    let (s, v) = call(&st, "POST", "/repair", Some(json!({"frame": raw}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert!(v["repair_report"]["repaired"].as_bool().unwrap());
    let (s, v) = call(&st, "POST", "/execute", Some(json!({"frame": v["repaired_frame"]}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert!(v["counts"]["primary"].as_u64().unwrap() > 0);

    let lines: Vec<Value> = st.audit.lines().iter().map(|l| serde_json::from_str(l).unwrap()).collect();
    let endpoints: Vec<&str> = lines.iter().map(|l| l["endpoint"].as_str().unwrap()).collect();
    assert_eq!(endpoints, ["interpret", "execute", "repair", "execute"]);
    assert_eq!(lines[1]["executed"], false);
    assert!(lines[1].get("provenance").is_none());
    assert_eq!(lines[3]["executed"], true);
}

#[tokio::test]
async fn errors_map_to_statuses() {
    let st = state();
    let (s, _) = call(&st, "POST", "/query", Some(json!({"txt": "x"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&st, "POST", "/query", Some(json!({"text": "  "}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = call(&st, "POST", "/query", Some(json!({"text": "what is the weather"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["repair_report"]["rejected"]["kind"], "unsupported");
    let (s, _) = call(&st, "POST", "/repair", Some(json!({"frame": {"supported": "yes"}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unreachable_backend_is_502() {
    // nothing listens on a freshly released port
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut cfg = RemoteConfig::new(&format!("http://127.0.0.1:{port}/v1/chat"), "m");
    cfg.timeout = std::time::Duration::from_secs(2);
    let mut engine = Engine::fixture(1);
    engine.interpreter = Interpreter::Remote(RemoteBackend::new(cfg));
    let st = Arc::new(AppState { engine, audit: AuditLog::memory() });
    let (s, v) = call(&st, "POST", "/query", Some(json!({"text": "show crashes in Quincy"}))).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY, "{v}");
    assert_eq!(v["error"]["code"], "interpreter_unavailable");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn serves_over_a_real_socket() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let server = tokio::spawn(serve(listener, state()));
    let body = tokio::task::spawn_blocking(move || {
        let mut r = ureq::get(&format!("http://{addr}/health")).call().unwrap();
        r.body_mut().read_to_string().unwrap()
    })
    .await
    .unwrap();
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["status"], "ok");
    server.abort();
}
