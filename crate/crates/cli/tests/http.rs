use std::path::PathBuf;
use std::process::Command;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use butler::files;
use butler::http::{router, AppState};
use butler_core::executor::ExecConfig;
use butler_core::service::{Engine, StreamEvent, StreamItem};
use butler_core::trace::Trace;
use serde_json::{json, Value};
use tower::ServiceExt;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn app(events: Option<&str>) -> Router {
    let path = events.map(data);
    let bundle = files::load(&data("house.world"), path.as_deref(), None).unwrap();
    let engine = Engine::load(&bundle.world, &bundle.script, 0, ExecConfig::default()).unwrap();
    router(AppState::new(engine))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

async fn json_call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn session(app: &Router, speaker: &str) -> u64 {
    let (s, v) = json_call(app, Method::POST, "/session", Some(json!({ "speaker": speaker }))).await;
    assert_eq!(s, StatusCode::CREATED);
    v["session"].as_u64().unwrap()
}

#[tokio::test]
async fn sessions_count_up() {
    let app = app(None);
    assert_eq!(session(&app, "jamie").await, 1);
    assert_eq!(session(&app, "jamie").await, 2);
    let (s, v) = json_call(&app, Method::POST, "/session", None).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["session"], 3);
}

#[tokio::test]
async fn command_statuses() {
    let app = app(Some("scenario1.events"));
    let id = session(&app, "jamie").await;
    let uri = format!("/session/{id}/command");

    let (s, v) = json_call(&app, Method::POST, &uri, Some(json!({ "text": "bring me a coke" }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "accepted");
    assert_eq!(v["task"], 1);
    assert!(v["goal"].as_str().unwrap().contains("jamie"));

    let (_, v) = json_call(&app, Method::POST, &uri, Some(json!({ "text": "put it on the table" }))).await;
    assert_eq!(v["status"], "clarification_needed", "{v}");
    assert!(!v["question"].as_str().unwrap().is_empty());

    let (_, v) = json_call(&app, Method::POST, &uri, Some(json!({ "text": "sing me a song" }))).await;
    assert_eq!(v["status"], "rejected", "{v}");
    assert!(!v["reason"].as_str().unwrap().is_empty());

    let (s, v) = json_call(&app, Method::POST, "/session/99/command", Some(json!({ "text": "bring me a coke" }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["error"].is_string());
    let (s, _) = call(&app, Method::GET, "/session/99/plan", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn events_are_acknowledged_or_refused() {
    let app = app(None);
    let ev = json!({ "op": "move_person", "id": "jamie", "near": "couch" });
    let (s, v) = json_call(&app, Method::POST, "/world/event", Some(ev)).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(v, json!({ "ack": true }));

    let (s, v) = json_call(&app, Method::POST, "/world/event", Some(json!({ "op": "remove_object", "id": "unicorn" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("unicorn"), "{v}");

    let (s, _) = call(&app, Method::POST, "/world/event", Some(json!({ "op": "teleport" }))).await;
    assert!(s.is_client_error());

    let (_, v) = json_call(&app, Method::POST, "/tick", None).await;
    assert_eq!(v["tick"], 1);
    let (s, world) = json_call(&app, Method::GET, "/world", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(world.to_string().contains("couch"));
}

#[tokio::test]
async fn views_follow_the_task() {
    let app = app(Some("scenario1.events"));
    let id = session(&app, "jamie").await;
    let (s, kb) = json_call(&app, Method::GET, "/kb", None).await;
    assert_eq!(s, StatusCode::OK);
    let fluents = kb["fluents"].as_array().unwrap();
    assert!(fluents.iter().any(|f| f["pred"] == "isNear" && f["args"] == json!(["jamie", "desk"])));

    let uri = format!("/session/{id}/command");
    json_call(&app, Method::POST, &uri, Some(json!({ "text": "bring me a coke from the kitchen" }))).await;
    let (_, v) = json_call(&app, Method::GET, &format!("/session/{id}/plan"), None).await;
    assert_eq!(v[0]["status"], "queued");

    json_call(&app, Method::POST, "/tick", None).await;
    let (_, v) = json_call(&app, Method::GET, &format!("/session/{id}/plan"), None).await;
    assert_eq!(v[0]["status"], "running");
    assert!(!v[0]["steps"].as_array().unwrap().is_empty());

    let (_, v) = json_call(&app, Method::POST, "/tick?until_idle=true&n=1000", None).await;
    assert_eq!(v["finished"][0]["outcome"], "success");
    let (_, v) = json_call(&app, Method::GET, &format!("/session/{id}/plan"), None).await;
    assert_eq!(v[0]["status"], "done");
    assert_eq!(v[0]["result"]["assumptions"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn stream_is_ordered_and_complete() {
    let app = app(Some("scenario4.events"));
    let id = session(&app, "jamie").await;
    let uri = format!("/session/{id}/command");
    json_call(&app, Method::POST, &uri, Some(json!({ "text": "bring me a coke and a beer" }))).await;
    json_call(&app, Method::POST, "/tick?until_idle=true&n=1000", None).await;

    let (s, body) = call(&app, Method::GET, "/stream?follow=false", None).await;
    assert_eq!(s, StatusCode::OK);
    let items: Vec<StreamEvent> = String::from_utf8(body)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!items.is_empty());
    for (i, w) in items.windows(2).enumerate() {
        assert!((w[0].tick, w[0].seq) < (w[1].tick, w[1].seq), "item {i} out of order");
    }
    for (i, item) in items.iter().enumerate() {
        assert_eq!(item.seq, i as u64);
    }

    let (_, trace) = call(&app, Method::GET, "/trace", None).await;
    let records = Trace::parse(std::str::from_utf8(&trace).unwrap()).unwrap();
    let streamed: Vec<_> = items
        .iter()
        .filter_map(|i| match &i.item {
            StreamItem::Trace { record } => Some(record.clone()),
            StreamItem::World { .. } => None,
        })
        .collect();
    assert_eq!(streamed, records);
    assert!(items.iter().any(|i| matches!(i.item, StreamItem::World { .. })));

    let (_, tail) = call(&app, Method::GET, &format!("/stream?follow=false&from={}", items.len() - 1), None).await;
    assert_eq!(String::from_utf8(tail).unwrap().lines().count(), 1);
}

#[tokio::test]
async fn http_trace_matches_cli_trace() {
    for n in 1..=5 {
        let events = format!("scenario{n}.events");
        let cmds = data(&format!("scenario{n}.cmds"));
        let dir = std::env::temp_dir().join(format!("butler-http-{}-{n}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("trace.ndjson");
        let status = Command::new(env!("CARGO_BIN_EXE_butler"))
            .arg("run")
            .arg("--world")
            .arg(data("house.world"))
            .arg("--events")
            .arg(data(&events))
            .arg("--commands")
            .arg(&cmds)
            .arg("--trace")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "scenario {n}");
        let cli = std::fs::read(&out).unwrap();

        let app = app(Some(&events));
        let text = std::fs::read_to_string(&cmds).unwrap();
        for c in butler_core::service::parse_commands(&text) {
            let (_, v) = json_call(&app, Method::POST, "/session", Some(json!({ "speaker": c.speaker }))).await;
            let id = v["session"].as_u64().unwrap();
            let (_, v) =
                json_call(&app, Method::POST, &format!("/session/{id}/command"), Some(json!({ "text": c.text }))).await;
            assert_eq!(v["status"], "accepted");
        }
        json_call(&app, Method::POST, "/tick?until_idle=true&n=1000", None).await;
        let (_, http) = call(&app, Method::GET, "/trace", None).await;
        assert_eq!(String::from_utf8(http).unwrap(), String::from_utf8(cli).unwrap(), "scenario {n}");
        std::fs::remove_dir_all(&dir).ok();
    }
}

#[tokio::test]
async fn follow_stream_delivers_new_items() {
    use futures::StreamExt;

    let path = data("scenario1.events");
    let bundle = files::load(&data("house.world"), Some(&path), None).unwrap();
    let engine = Engine::load(&bundle.world, &bundle.script, 0, ExecConfig::default()).unwrap();
    let state = AppState::new(engine);
    let app = router(state.clone());
    let id = session(&app, "jamie").await;
    json_call(&app, Method::POST, &format!("/session/{id}/command"), Some(json!({ "text": "bring me a coke" }))).await;

    let resp = app
        .clone()
        .oneshot(Request::get("/stream").body(Body::empty()).unwrap())
        .await
        .unwrap();
    let mut body = resp.into_body().into_data_stream();
    let waiting = tokio::time::timeout(std::time::Duration::from_millis(50), body.next()).await;
    assert!(waiting.is_err(), "nothing happened yet");

    state.tick(1);
    let chunk = tokio::time::timeout(std::time::Duration::from_secs(5), body.next())
        .await
        .expect("live item")
        .unwrap()
        .unwrap();
    let first: StreamEvent = serde_json::from_str(std::str::from_utf8(&chunk).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first.seq, 0);
}
