use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tower::ServiceExt;
use uatm_cli::http::router;
use uatm_core::fixtures::episode;
use uatm_core::{load_network, OperatorService};

fn app() -> axum::Router {
    let (n, a) = load_network(episode::NETWORK).unwrap();
    router(Arc::new(OperatorService::with_session(n, a).unwrap()))
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn fresh_state_and_network() {
    let app = app();
    let (s, v) = call(&app, "GET", "/api/state", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["step"], 1);
    assert!(v["vertiports"].as_array().unwrap().iter().all(|p| p["closed"] == false));
    let (s, v) = call(&app, "GET", "/api/network", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["config"]["corridors"].as_array().unwrap().len(), 12);
    assert_eq!(
        v["coverage_gaps"][0],
        json!({"corridor": [7, 6], "first": 13, "last": 16})
    );
}

#[tokio::test]
async fn no_session_is_a_conflict() {
    let app = router(Arc::new(OperatorService::new()));
    let (s, v) = call(&app, "GET", "/api/state", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "no session loaded");
}

#[tokio::test]
async fn closure_landing_and_explanation() {
    let app = app();
    let (s, v) = call(&app, "POST", "/api/close", Some(json!({"vertiport": 6}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["accepted"], true);
    assert_eq!(v["outcome"]["notices"].as_array().unwrap().len(), 5);

    let (s, v) = call(&app, "GET", "/api/explain?atom=target_change(1,2)", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["tree"]["rule"]["source"]
        .as_str()
        .unwrap()
        .starts_with("target_change(A, T) :-"));
    let (s, _) = call(&app, "GET", "/api/explain?atom=target_change(4,2)", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", "/api/explain?atom=target_change(4", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, _) = call(&app, "POST", "/api/advance", None).await;
    assert_eq!(s, StatusCode::OK);
    let body = json!({"agent": 4, "corridor": [7, 6], "waypoint": 17});
    let (s, v) = call(&app, "POST", "/api/landing-request", Some(body)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["outcome"]["notices"][0]["step"], 3);
    assert_eq!(
        v["outcome"]["landing_requests"][0],
        json!({"agent": 4, "step": 2, "vertiport": 6})
    );
}

#[tokio::test]
async fn rejected_commands() {
    let app = app();
    let (s, v) = call(&app, "POST", "/api/close", Some(json!({"vertiport": 99}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["accepted"], false);
    assert_eq!(v["diagnostics"][0], "unknown vertiport 99");
}

#[tokio::test]
async fn reopen_and_reset() {
    let app = app();
    call(&app, "POST", "/api/close", Some(json!({"vertiport": 6}))).await;
    let (_, v) = call(&app, "POST", "/api/reopen", Some(json!({"vertiport": 6}))).await;
    assert_eq!(v["accepted"], true);
    let (s, v) = call(&app, "POST", "/api/reset", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["verdict"], Value::Null);
    let res = app
        .clone()
        .oneshot(Request::get("/api/transcript").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert!(to_bytes(res.into_body(), usize::MAX).await.unwrap().is_empty());
}

/// Reads server-sent events over a real socket until `count` deltas arrive.
#[tokio::test]
async fn event_stream_delivers_one_delta_per_command() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = app();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });

    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream
        .write_all(b"GET /api/events HTTP/1.1\r\nHost: test\r\nAccept: text/event-stream\r\n\r\n")
        .await
        .unwrap();
    let mut buf = vec![0u8; 4096];
    let n = stream.read(&mut buf).await.unwrap();
    assert!(String::from_utf8_lossy(&buf[..n]).contains("text/event-stream"));

    let client = tokio::net::TcpStream::connect(addr).await.unwrap();
    drop(client);
    for (path, body) in [("/api/close", r#"{"vertiport":6}"#), ("/api/advance", "")] {
        let mut c = tokio::net::TcpStream::connect(addr).await.unwrap();
        let req = format!(
            "POST {path} HTTP/1.1\r\nHost: test\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        c.write_all(req.as_bytes()).await.unwrap();
        let mut sink = Vec::new();
        c.read_to_end(&mut sink).await.unwrap();
    }

    let mut seen = String::new();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    while seen.matches("event: delta").count() < 2 && tokio::time::Instant::now() < deadline {
        let n = tokio::time::timeout(Duration::from_secs(5), stream.read(&mut buf))
            .await
            .unwrap()
            .unwrap();
        seen.push_str(&String::from_utf8_lossy(&buf[..n]));
    }
    let close = seen.find("\"kind\":\"close\"").unwrap();
    let advance = seen.find("\"kind\":\"advance\"").unwrap();
    assert!(close < advance);
    assert!(seen.contains("id: 1") && seen.contains("id: 2"));
}
