use std::path::Path;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use futures::StreamExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;
use vlafarm::replay::replay;
use vlafarm::scenario::LoadedScenario;
use vlafarm::service::{router, spawn_session, ServiceConfig};
use vlafarm_core::control::ScenarioScript;

fn scenario(duration: f64) -> LoadedScenario {
    LoadedScenario::from_script(ScenarioScript {
        duration,
        ..ScenarioScript::default()
    })
    .unwrap()
}

fn app(duration: f64, speed: f64, out: Option<&Path>) -> Router {
    let cfg = ServiceConfig {
        speed,
        step: 0.1,
        out: out.map(Path::to_path_buf),
    };
    let (state, _session) = spawn_session(&scenario(duration), &cfg).unwrap();
    router(state)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn post_raw(app: &Router, uri: &str, body: &'static str) -> StatusCode {
    let req = Request::builder().method("POST").uri(uri).body(Body::from(body)).unwrap();
    app.clone().oneshot(req).await.unwrap().status()
}

async fn wait_until(app: &Router, pred: impl Fn(&Value) -> bool) -> Value {
    for _ in 0..2000 {
        let (_, state) = call(app, "GET", "/state", None).await;
        if pred(&state) {
            return state;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("state never satisfied the predicate");
}

#[tokio::test]
async fn stop_and_go_acknowledge_and_reject_repeats() {
    let app = app(1000.0, 1.0, None);
    let (s, ack) = call(&app, "POST", "/run/stop", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ack["deferred"], false);
    let (_, state) = call(&app, "GET", "/state", None).await;
    assert_eq!(state["stopped"], true);
    let (s, err) = call(&app, "POST", "/run/stop", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(err["error"].as_str().unwrap().contains("stopped"));
    assert_eq!(call(&app, "POST", "/run/go", None).await.0, StatusCode::OK);
    assert_eq!(call(&app, "POST", "/run/pause", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn inject_validates_its_body() {
    let app = app(1000.0, 1.0, None);
    assert_eq!(post_raw(&app, "/inject", "{not json").await, StatusCode::BAD_REQUEST);
    assert_eq!(post_raw(&app, "/inject", r#"{"kind":"explode"}"#).await, StatusCode::BAD_REQUEST);
    let (s, err) = call(&app, "POST", "/inject", Some(json!({"kind": "hang_pa", "worker": 99}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(err["error"].as_str().unwrap().contains("99"));
    let (s, _) = call(&app, "POST", "/inject", Some(json!({"kind": "set_error_rate", "p": 2.0}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/inject", Some(json!({"kind": "set_authority", "mask": {"wr": true}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    // nothing rejected reaches the journal
    let (_, journal) = call(&app, "GET", "/journal", None).await;
    assert_eq!(journal, json!([]));
}

#[tokio::test]
async fn hang_shows_in_state_on_the_applied_worker() {
    let app = app(1000.0, 1.0, None);
    let (s, ack) = call(&app, "POST", "/inject", Some(json!({"kind": "hang_pa", "worker": 5}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ack["seq"], 0);
    let (_, state) = call(&app, "GET", "/state", None).await;
    assert_eq!(state["record"]["workers"][5]["status"], "hung");
    assert_eq!(state["journal_entries"], 1);
}

#[tokio::test]
async fn commands_while_stopped_wait_for_go() {
    let app = app(1000.0, 1.0, None);
    call(&app, "POST", "/run/stop", None).await;
    let (_, ack) = call(&app, "POST", "/inject", Some(json!({"kind": "hang_pa", "worker": 2}))).await;
    assert_eq!(ack["deferred"], true);
    assert_eq!(ack["seq"], Value::Null);
    let (_, state) = call(&app, "GET", "/state", None).await;
    assert_eq!(state["deferred"].as_array().unwrap().len(), 1);
    assert_ne!(state["record"]["workers"][2]["status"], "hung");
    call(&app, "POST", "/run/go", None).await;
    let (_, state) = call(&app, "GET", "/state", None).await;
    assert_eq!(state["record"]["workers"][2]["status"], "hung");
    let (_, journal) = call(&app, "GET", "/journal", None).await;
    let kinds: Vec<_> = journal.as_array().unwrap().iter().map(|e| e["command"]["kind"].clone()).collect();
    assert_eq!(kinds, [json!("stop"), json!("go"), json!("hang_pa")]);
}

#[tokio::test]
async fn authority_toggles_are_journaled_with_before_and_after() {
    let app = app(1000.0, 1.0, None);
    let masks = [
        json!({"wr": true, "fp": true, "gp": false, "gf": false}),
        json!({"wr": true, "fp": true, "gp": false, "gf": true}),
        json!({"wr": false, "fp": false, "gp": true, "gf": true}),
    ];
    for m in &masks {
        let (s, _) = call(&app, "POST", "/inject", Some(json!({"kind": "set_authority", "mask": m}))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, journal) = call(&app, "GET", "/journal", None).await;
    let entries = journal.as_array().unwrap();
    assert_eq!(entries.len(), 3);
    let expected = [("WR|FP|GF", "WR|FP"), ("WR|FP", "WR|FP|GF"), ("WR|FP|GF", "GP|GF")];
    for (e, (prev, new)) in entries.iter().zip(expected) {
        assert_eq!(e["actor"], "operator");
        assert!(e["wall_ms"].as_u64().unwrap() > 0);
        assert_eq!((e["previous"].as_str().unwrap(), e["new"].as_str().unwrap()), (prev, new));
    }
    let (_, state) = call(&app, "GET", "/state", None).await;
    assert_eq!(state["authority"], masks[2]);
}

#[tokio::test]
async fn journal_range_queries_filter_by_virtual_time() {
    let app = app(1000.0, 20.0, None);
    call(&app, "POST", "/inject", Some(json!({"kind": "set_error_rate", "p": 0.1}))).await;
    let state = wait_until(&app, |s| s["t"].as_f64().unwrap() > 1.0).await;
    let t_mid = state["t"].as_f64().unwrap();
    call(&app, "POST", "/inject", Some(json!({"kind": "set_error_rate", "p": 0.2}))).await;

    let (_, all) = call(&app, "GET", "/journal", None).await;
    assert_eq!(all.as_array().unwrap().len(), 2);
    let (_, early) = call(&app, "GET", &format!("/journal?to={}", t_mid - 0.5), None).await;
    assert_eq!(early.as_array().unwrap().len(), 1);
    let (_, late) = call(&app, "GET", &format!("/journal?from={}", t_mid - 0.05), None).await;
    assert_eq!(late.as_array().unwrap().len(), 1);
    assert_eq!(late[0]["command"]["p"], 0.2);
    let (_, empty) = call(&app, "GET", "/journal?from=500&to=600", None).await;
    assert_eq!(empty, json!([]));
}

#[tokio::test]
async fn finished_runs_reject_commands_but_still_answer_queries() {
    let app = app(0.5, 50.0, None);
    let state = wait_until(&app, |s| s["finished"] == true).await;
    assert!((state["t"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    let (s, err) = call(&app, "POST", "/inject", Some(json!({"kind": "hang_pa", "worker": 0}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(err["error"].as_str().unwrap().contains("finished"));
    assert_eq!(call(&app, "GET", "/journal", None).await.0, StatusCode::OK);
}

fn run_dir(out: &Path) -> std::path::PathBuf {
    let mut dirs: Vec<_> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1);
    dirs.pop().unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_streams_the_records_mirrored_to_disk() {
    let out = TempDir::new().unwrap();
    let app = app(3.0, 10.0, Some(out.path()));
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let server = app.clone();
    tokio::spawn(async move { axum::serve(listener, server).await });

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/telemetry")).await.unwrap();
    let mut lines = Vec::new();
    while lines.len() < 5 {
        match tokio::time::timeout(Duration::from_secs(10), ws.next()).await.unwrap() {
            Some(Ok(Message::Text(t))) => lines.push(t.to_string()),
            other => panic!("unexpected frame {other:?}"),
        }
    }
    call(&app, "POST", "/inject", Some(json!({"kind": "hang_pa", "worker": 1}))).await;
    wait_until(&app, |s| s["finished"] == true).await;

    let ts: Vec<f64> = lines
        .iter()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["t"].as_f64().unwrap())
        .collect();
    assert!(ts.windows(2).all(|w| w[0] < w[1]), "{ts:?}");

    let dir = run_dir(out.path());
    let file = std::fs::read_to_string(dir.join("telemetry.ndjson")).unwrap();
    let records: Vec<&str> = file.lines().collect();
    assert_eq!(records.len(), 30);
    // the client joined late, so it saw a contiguous run of the file
    let first = records.iter().position(|r| *r == lines[0].trim_end()).unwrap();
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(records[first + i], l.trim_end());
    }

    // the live run, operator commands included, replays from its journal
    let report = tokio::task::spawn_blocking(move || replay(&dir)).await.unwrap().unwrap();
    assert!(report.identical(), "{:?}", report.divergences);
}

#[tokio::test]
async fn concurrent_clients_are_serialized_in_receipt_order() {
    let app = app(1000.0, 1.0, None);
    let mut tasks = Vec::new();
    for w in 0..8u32 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            call(&app, "POST", "/inject", Some(json!({"kind": "hang_pa", "worker": w}))).await.1
        }));
    }
    let mut seqs = Vec::new();
    for t in tasks {
        seqs.push(t.await.unwrap()["seq"].as_u64().unwrap());
    }
    seqs.sort_unstable();
    assert_eq!(seqs, (0..8).collect::<Vec<u64>>());
    let (_, journal) = call(&app, "GET", "/journal", None).await;
    let journal_seqs: Vec<u64> = journal.as_array().unwrap().iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(journal_seqs, seqs);
}
