mod common;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use hetqa_server::api::{router, AppState};
use hetqa_server::session::SessionStore;
use hetqa_server::views::{SessionView, TurnView};

fn app() -> Router {
    router(AppState::new(
        common::demo_pipeline(),
        SessionStore::in_memory(),
    ))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/api/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    body["session_id"].as_str().unwrap().to_string()
}

async fn ask(app: &Router, id: &str, q: &str) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/api/sessions/{id}/questions"),
        Some(json!({ "question": q })),
    )
    .await
}

#[tokio::test]
async fn health_reports_model_versions() {
    let (status, body) = call(&app(), "GET", "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    for k in ["pruning", "answering"] {
        assert!(body["model_versions"][k]
            .as_str()
            .unwrap()
            .starts_with("sha256:"));
    }
    assert_ne!(
        body["model_versions"]["pruning"],
        body["model_versions"]["answering"]
    );
}

#[tokio::test]
async fn sessions_start_empty_and_are_distinct() {
    let app = app();
    let (a, b) = (new_session(&app).await, new_session(&app).await);
    assert_ne!(a, b);
    let (status, body) = call(&app, "GET", &format!("/api/sessions/{a}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["session_id"], a.as_str());
    assert_eq!(body["turns"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn conversation_flow() {
    let app = app();
    let id = new_session(&app).await;
    let (status, t1) = ask(&app, &id, "Who wrote the book Angels and Demons?").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(t1["turn"], 1);
    assert_eq!(t1["existential"], false);
    assert_eq!(t1["answer"]["label"], "Dan Brown");
    assert_eq!(t1["sr"]["question"], "Angels and Demons");
    for slot in ["context", "question", "relation", "type"] {
        assert!(t1["sr"][slot].is_string());
    }
    assert!(t1["ranked_answers"].as_array().unwrap().len() <= 10);
    let evs = t1["evidences"].as_array().unwrap();
    assert_eq!(evs.len(), 5);
    for e in evs {
        assert!(["kb", "text", "table", "infobox"].contains(&e["source"].as_str().unwrap()));
        assert!(e["score"].is_f64() && e["text"].is_string());
        assert!(e["entities"]
            .as_array()
            .unwrap()
            .iter()
            .all(|x| x["id"].is_string() && x["label"].is_string()));
    }
    assert!(evs
        .iter()
        .any(|e| e["text"].as_str().unwrap().contains("Dan Brown")));

    let (_, t2) = ask(&app, &id, "the main character in his books?").await;
    // "his" resolves to the previous predicted answer
    assert_eq!(t2["sr"]["question"], "Dan Brown");
    let (_, t3) = ask(&app, &id, "who played him in the films?").await;
    assert_eq!(t3["sr"]["question"], t2["answer"]["label"]);
    assert_eq!(t3["turn"], 3);

    let (_, yes) = ask(&app, &id, "Is Tom Hanks an actor?").await;
    assert_eq!(yes["existential"], true);
    assert_eq!(yes["answer"]["label"], "Yes");

    let (status, session) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let turns = session["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 4);
    assert_eq!(turns[0], t1);
    assert_eq!(turns[2], t3);
    // lossless through the typed wire format
    let typed: SessionView = serde_json::from_value(session.clone()).unwrap();
    assert_eq!(serde_json::to_value(&typed).unwrap(), session);
}

#[tokio::test]
async fn errors() {
    let app = app();
    let (status, body) = call(&app, "GET", "/api/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("nope"));
    assert_eq!(ask(&app, "nope", "Who?").await.0, StatusCode::NOT_FOUND);

    let id = new_session(&app).await;
    assert_eq!(
        ask(&app, &id, "   ").await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/questions"),
        Some(json!({ "q": 1 })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    assert_eq!(
        call(&app, "DELETE", &format!("/api/sessions/{id}"), None)
            .await
            .0,
        StatusCode::NO_CONTENT
    );
    assert_eq!(
        ask(&app, &id, "Who wrote the book Angels and Demons?")
            .await
            .0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&app, "DELETE", &format!("/api/sessions/{id}"), None)
            .await
            .0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn unknown_entities_give_a_diagnostic() {
    let app = app();
    let id = new_session(&app).await;
    let (status, t) = ask(&app, &id, "Who painted the Mona Lisa?").await;
    assert_eq!(status, StatusCode::OK);
    assert!(t["answer"].is_null());
    assert_eq!(t["diagnostic"], "no evidence");
    assert_eq!(t["evidences"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn fresh_sessions_answer_identically() {
    let app = app();
    let questions = [
        "Who wrote the book Angels and Demons?",
        "the main character in his books?",
        "who played him in the films?",
    ];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let id = new_session(&app).await;
        let mut turns = Vec::new();
        for q in questions {
            turns.push(ask(&app, &id, q).await.1);
        }
        runs.push(turns);
    }
    assert_eq!(runs[0], runs[1]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn same_session_requests_are_serialized() {
    let app = app();
    let id = new_session(&app).await;
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let (app, id) = (app.clone(), id.clone());
            tokio::spawn(
                async move { ask(&app, &id, "Who wrote the book Angels and Demons?").await },
            )
        })
        .collect();
    let mut numbers = Vec::new();
    for h in handles {
        let (status, t) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        numbers.push(t["turn"].as_u64().unwrap());
    }
    numbers.sort_unstable();
    assert_eq!(numbers, vec![1, 2, 3, 4, 5, 6]);
    let (_, s) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    let turns: Vec<TurnView> = serde_json::from_value(s["turns"].clone()).unwrap();
    assert!(turns.iter().enumerate().all(|(i, t)| t.turn == i + 1));
}

#[tokio::test]
async fn sessions_survive_a_restart_with_a_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("sessions.jsonl");
    let first = router(AppState::new(
        common::demo_pipeline(),
        SessionStore::persistent(&log).unwrap(),
    ));
    let id = new_session(&first).await;
    let (_, t1) = ask(&first, &id, "Who wrote the book Angels and Demons?").await;
    drop(first);

    let second = router(AppState::new(
        common::demo_pipeline(),
        SessionStore::persistent(&log).unwrap(),
    ));
    let (status, s) = call(&second, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["turns"][0], t1);
    // the replayed history feeds the next SR
    let (_, t2) = ask(&second, &id, "the main character in his books?").await;
    assert_eq!(t2["turn"], 2);
    assert_eq!(t2["sr"]["question"], t1["answer"]["label"]);
}
