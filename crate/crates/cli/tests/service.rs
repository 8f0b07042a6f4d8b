use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use boxlab::trajectory::read_csv;
use boxlab::Layout;
use boxlab_cli::service::{router, ManualClock, ServiceConfig, SessionService};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Harness {
    app: Router,
    clock: Arc<ManualClock>,
}

fn harness(config: ServiceConfig) -> Harness {
    let clock = Arc::new(ManualClock::new(1_000.0));
    let svc = SessionService::open(config, clock.clone()).unwrap();
    Harness { app: router(Arc::new(svc)), clock }
}

impl Harness {
    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    async fn json(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (s, text) = self.call(method, uri, body).await;
        (s, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    async fn create(&self, body: Value) -> String {
        let (s, v) = self.json("POST", "/sessions", Some(body)).await;
        assert_eq!(s, StatusCode::CREATED);
        v["session_id"].as_str().unwrap().to_string()
    }

    async fn started(&self, body: Value) -> String {
        let id = self.create(body).await;
        let (s, v) = self.json("POST", &format!("/sessions/{id}/start"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["phase"], "test");
        id
    }

    async fn attempt(&self, id: &str, key: &str, box_id: &str) -> (StatusCode, Value) {
        let body = json!({"type": "attempt", "box_id": box_id, "key_id": key});
        self.json("POST", &format!("/sessions/{id}/actions"), Some(body)).await
    }
}

const SOLUTION: [(&str, &str); 5] =
    [("red1", "red"), ("grey2", "pink"), ("orange4", "white"), ("green3", "purple"), ("yellow5", "blue")];

fn reliable() -> Value {
    json!({"reliability": "deterministic", "seed": 3})
}

#[tokio::test]
async fn create_describes_keys_boxes_and_the_instruction() {
    let h = harness(ServiceConfig::default());
    let (s, v) = h.json("POST", "/sessions", None).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["phase"], "practice");
    assert_eq!(v["observability"], "partial");
    assert_eq!(v["reliability"], "children");
    assert_eq!(v["time_limit_secs"], 300.0);
    assert_eq!(v["keys"].as_array().unwrap().len(), 13);
    let boxes = v["boxes"].as_array().unwrap();
    assert_eq!(boxes.len(), 5);
    assert!(boxes.iter().all(|b| b["shape_count"].is_null() && b["open"] == false));
    let ids: Vec<&str> = boxes.iter().map(|b| b["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["red", "pink", "white", "purple", "blue"]);
    let instruction = &v["instruction"];
    assert!(instruction["teacher_text"].as_str().unwrap().contains("matches the color of the box"));
    assert_eq!(instruction["demonstration"], json!({"key_id": "red1", "box_id": "red"}));
    assert!(v["generalization"].is_null());
}

#[tokio::test]
async fn full_observability_shows_counts() {
    let h = harness(ServiceConfig::default());
    let (_, v) = h.json("POST", "/sessions", Some(json!({"observability": "full"}))).await;
    let counts: Vec<u64> = v["boxes"].as_array().unwrap().iter().map(|b| b["shape_count"].as_u64().unwrap()).collect();
    assert_eq!(counts, [1, 2, 4, 3, 5]);
}

#[tokio::test]
async fn attempts_and_pick_ups_update_the_state() {
    let h = harness(ServiceConfig::default());
    let id = h.started(reliable()).await;
    let (s, v) = h.attempt(&id, "pink6", "pink").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["outcome"], json!({"type": "attempt", "success": false}));
    let (s, v) = h.json("POST", &format!("/sessions/{id}/actions"), Some(json!({"type": "observe", "box_id": "purple"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["outcome"], json!({"type": "observe", "revealed": 3}));
    assert_eq!(v["state"]["boxes"][3]["shape_count"], 3);
    assert!(v["state"]["boxes"][0]["shape_count"].is_null());
    let (_, v) = h.attempt(&id, "red1", "red").await;
    assert_eq!(v["outcome"]["success"], true);
    assert_eq!(v["state"]["boxes"][0]["open"], true);
    assert_eq!(v["state"]["trials"], 3);
    assert_eq!(v["state"]["history"].as_array().unwrap().len(), 3);
    assert_eq!(v["state"]["history"][1]["type"], "observe");
    assert!(v["state"]["remaining_secs"].as_f64().unwrap() > 299.0);
}

#[tokio::test]
async fn bad_input_is_rejected_with_400() {
    let h = harness(ServiceConfig::default());
    let id = h.started(reliable()).await;
    let uri = format!("/sessions/{id}/actions");
    for body in [
        json!({"type": "attempt", "box_id": "red"}),
        json!({"type": "attempt", "box_id": "red", "key_id": "gold9"}),
        json!({"type": "attempt", "box_id": "maroon", "key_id": "red1"}),
        json!({"type": "observe", "box_id": "red", "key_id": "red1"}),
        json!({"type": "dance", "box_id": "red"}),
    ] {
        let (s, _) = h.json("POST", &uri, Some(body.clone())).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
    }
    let (s, _) = h.call("POST", &uri, None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    h.attempt(&id, "red1", "red").await;
    let (s, v) = h.attempt(&id, "red1", "red").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("red"));
    let (_, v) = h.json("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["trials"], 1);
}

#[tokio::test]
async fn wrong_phase_is_409() {
    let h = harness(ServiceConfig::default());
    let id = h.create(reliable()).await;
    let (s, _) = h.attempt(&id, "red1", "red").await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = h.json("POST", &format!("/sessions/{id}/generalization"), Some(json!({"choices": []}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    h.json("POST", &format!("/sessions/{id}/start"), None).await;
    let (s, _) = h.json("POST", &format!("/sessions/{id}/start"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let h = harness(ServiceConfig::default());
    for (m, uri) in [
        ("GET", "/sessions/nope"),
        ("POST", "/sessions/nope/start"),
        ("GET", "/sessions/nope/trajectory"),
    ] {
        assert_eq!(h.call(m, uri, None).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    let (s, _) = h.attempt("nope", "red1", "red").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn actions_after_the_time_limit_are_410() {
    let h = harness(ServiceConfig::default());
    let id = h.started(reliable()).await;
    h.clock.advance(299.0);
    let (s, v) = h.attempt(&id, "pink6", "pink").await;
    assert_eq!(s, StatusCode::OK);
    assert!((v["state"]["remaining_secs"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    h.clock.advance(1.0);
    let (s, _) = h.attempt(&id, "red1", "red").await;
    assert_eq!(s, StatusCode::GONE);
    let (_, v) = h.json("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["phase"], "generalization");
    assert_eq!(v["expired"], true);
    assert_eq!(v["completed"], false);
    assert_eq!(v["trials"], 1);
    let (s, _) = h.json("POST", &format!("/sessions/{id}/actions"), Some(json!({"type": "observe", "box_id": "red"}))).await;
    assert_eq!(s, StatusCode::GONE);
}

#[tokio::test]
async fn the_time_limit_is_configurable() {
    let h = harness(ServiceConfig { time_limit_secs: 10.0, ..ServiceConfig::default() });
    let id = h.started(reliable()).await;
    h.clock.advance(10.5);
    assert_eq!(h.attempt(&id, "red1", "red").await.0, StatusCode::GONE);
}

async fn complete_test_phase(h: &Harness, id: &str) -> Value {
    let mut last = Value::Null;
    for (k, b) in SOLUTION {
        let (s, v) = h.attempt(id, k, b).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["outcome"]["success"], true);
        last = v;
    }
    last["state"].clone()
}

#[tokio::test]
async fn completion_opens_four_by_four_generalization() {
    let h = harness(ServiceConfig::default());
    let id = h.started(reliable()).await;
    let state = complete_test_phase(&h, &id).await;
    assert_eq!(state["phase"], "generalization");
    assert_eq!(state["completed"], true);
    assert_eq!(state["expired"], false);
    let trials = state["generalization"].as_array().unwrap();
    assert_eq!(trials.len(), 4);
    for t in trials {
        let keys = t["keys"].as_array().unwrap();
        assert_eq!(keys.len(), 4);
        let box_color = t["box"]["color"].as_str().unwrap();
        assert_eq!(keys.iter().filter(|k| k["color"] == box_color).count(), 1);
        assert!(t["box"]["shape_count"].as_u64().is_some());
    }
    assert_eq!(h.attempt(&id, "red1", "red").await.0, StatusCode::CONFLICT);

    let uri = format!("/sessions/{id}/generalization");
    let pick: Vec<String> = trials.iter().map(|t| t["keys"][0]["id"].as_str().unwrap().to_string()).collect();
    let (s, _) = h.json("POST", &uri, Some(json!({"choices": &pick[..3]}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let mut wrong = pick.clone();
    wrong[0] = "red1".into();
    let (s, _) = h.json("POST", &uri, Some(json!({"choices": wrong}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = h.json("POST", &uri, Some(json!({"choices": pick}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["phase"], "done");
    assert_eq!(v["generalization_choices"], json!(pick));
    let (s, _) = h.json("POST", &uri, Some(json!({"choices": pick}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn expired_sessions_still_take_generalization_choices() {
    let h = harness(ServiceConfig::default());
    let id = h.started(reliable()).await;
    h.clock.advance(400.0);
    let (_, v) = h.json("GET", &format!("/sessions/{id}"), None).await;
    let pick: Vec<Value> = v["generalization"].as_array().unwrap().iter().map(|t| t["keys"][2]["id"].clone()).collect();
    let (s, v) = h.json("POST", &format!("/sessions/{id}/generalization"), Some(json!({"choices": pick}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["phase"], "done");
}

#[tokio::test]
async fn downloaded_trajectories_pass_ingestion() {
    let h = harness(ServiceConfig::default());
    let id = h.started(json!({"seed": 11})).await;
    h.json("POST", &format!("/sessions/{id}/actions"), Some(json!({"type": "observe", "box_id": "white"}))).await;
    h.attempt(&id, "pink6", "pink").await;
    for (k, b) in SOLUTION {
        for _ in 0..6 {
            let (s, v) = h.attempt(&id, k, b).await;
            if s != StatusCode::OK || v["outcome"]["success"] == true {
                break;
            }
        }
    }
    let (s, csv) = h.call("GET", &format!("/sessions/{id}/trajectory"), None).await;
    assert_eq!(s, StatusCode::OK);
    let trajs = read_csv(csv.as_bytes(), &Layout::standard()).unwrap();
    assert_eq!(trajs.len(), 1);
    assert_eq!(trajs[0].subject_id, id);
    let (_, v) = h.json("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(trajs[0].len() as u64, v["trials"].as_u64().unwrap());
    assert_eq!(trajs[0].n_observes(), 1);
    assert_eq!(trajs[0].metadata.completed, v["completed"].as_bool().unwrap());
}

#[tokio::test]
async fn restart_recovers_sessions_from_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("sessions.jsonl");
    let config = ServiceConfig { log_path: Some(log.clone()), ..ServiceConfig::default() };
    let h = harness(config.clone());
    let done = h.started(json!({"seed": 5})).await;
    h.json("POST", &format!("/sessions/{done}/actions"), Some(json!({"type": "observe", "box_id": "blue"}))).await;
    for _ in 0..4 {
        h.attempt(&done, "pink6", "pink").await;
        h.attempt(&done, "red1", "red").await;
    }
    let open = h.create(json!({})).await;
    h.attempt(&open, "red1", "red").await;

    let (_, before) = h.json("GET", &format!("/sessions/{done}"), None).await;
    let (_, csv_before) = h.call("GET", &format!("/sessions/{done}/trajectory"), None).await;
    let (_, open_before) = h.json("GET", &format!("/sessions/{open}"), None).await;
    drop(h);

    let restarted = harness(config);
    let (s, after) = restarted.json("GET", &format!("/sessions/{done}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(after["history"], before["history"]);
    assert_eq!(after["boxes"], before["boxes"]);
    assert_eq!(after["phase"], before["phase"]);
    let (_, csv_after) = restarted.call("GET", &format!("/sessions/{done}/trajectory"), None).await;
    assert_eq!(csv_after, csv_before);
    let (_, open_after) = restarted.json("GET", &format!("/sessions/{open}"), None).await;
    assert_eq!(open_after["phase"], open_before["phase"]);
    assert_eq!(open_after["trials"], 0);

    let (s, _) = restarted.attempt(&done, "grey2", "pink").await;
    assert_eq!(s, StatusCode::OK);
    let lines = std::fs::read_to_string(&log).unwrap();
    assert!(lines.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
}

#[tokio::test]
async fn a_torn_final_log_line_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("sessions.jsonl");
    let config = ServiceConfig { log_path: Some(log.clone()), ..ServiceConfig::default() };
    let h = harness(config.clone());
    let id = h.started(reliable()).await;
    drop(h);
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("{\"event\":\"action\",\"sess");
    std::fs::write(&log, text).unwrap();
    let h = harness(config);
    let (_, v) = h.json("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["phase"], "test");
}

#[tokio::test]
async fn concurrent_sessions_stay_independent() {
    let h = Arc::new(harness(ServiceConfig::default()));
    let mut ids = Vec::new();
    for _ in 0..8 {
        ids.push(h.started(reliable()).await);
    }
    let tasks: Vec<_> = ids
        .iter()
        .cloned()
        .map(|id| {
            let h = h.clone();
            tokio::spawn(async move {
                for (k, b) in SOLUTION {
                    assert_eq!(h.attempt(&id, k, b).await.0, StatusCode::OK);
                }
            })
        })
        .collect();
    for t in tasks {
        t.await.unwrap();
    }
    for id in ids {
        let (_, v) = h.json("GET", &format!("/sessions/{id}"), None).await;
        assert_eq!(v["trials"], 5);
        assert_eq!(v["phase"], "generalization");
    }
}
