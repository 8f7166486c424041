use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use persuasion_core::session::{replay_actions, CompletionSink, SessionManager};
use persuasion_core::{seeded, synth_corpus, Action, ExpertStrategy, GameConfig, GameRecord};
use persuasion_service::router;

fn app() -> (Router, Arc<SessionManager>, Arc<Mutex<Vec<GameRecord>>>) {
    let corpus = Arc::new(synth_corpus(80, &mut seeded(2), 0.5));
    let sink = Arc::new(Mutex::new(Vec::new()));
    let m = Arc::new(
        SessionManager::new(corpus, GameConfig::default(), 7)
            .unwrap()
            .with_sink(sink.clone() as Arc<dyn CompletionSink>),
    );
    (router(m.clone()), m, sink)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, String) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null), text)
}

async fn create(app: &Router) -> String {
    let (s, v, _) = call(app, "POST", "/sessions", Some(json!({"player_alias": "p1"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    v["session_id"].as_str().unwrap().to_string()
}

/// True if any key names a score, quality or strategy, or any string value
/// is a strategy identifier.
fn leaks(text: &str) -> bool {
    fn walk(v: &Value) -> bool {
        match v {
            Value::Object(m) => m.iter().any(|(k, v)| {
                ["score", "quality", "strategy", "expert_id"].iter().any(|w| k.contains(w)) || walk(v)
            }),
            Value::Array(a) => a.iter().any(walk),
            Value::String(s) => ExpertStrategy::ALL.iter().any(|e| s == e.as_str()),
            _ => false,
        }
    }
    walk(&serde_json::from_str(text).unwrap())
}

#[tokio::test]
async fn create_returns_intro() {
    let (app, _, _) = app();
    let (s, v, _) = call(&app, "POST", "/sessions", Some(json!({"player_alias": "p"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert!(v["intro"]["text"].as_str().unwrap().contains("You need to earn 10 points to win the game."));
    assert_eq!(v["intro"]["points_target"], 10);
    let (_, w, _) = call(&app, "POST", "/sessions", Some(json!({"player_alias": "q"}))).await;
    assert_ne!(v["session_id"], w["session_id"]);
}

#[tokio::test]
async fn validation_errors() {
    let (app, _, _) = app();
    let (s, v, _) = call(&app, "POST", "/sessions", Some(json!({"player_alias": ""}))).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("missing_alias")));
    let (s, v, _) = call(&app, "POST", "/sessions", Some(json!({}))).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_request")));
    let (s, v, _) = call(&app, "GET", "/sessions/nope/round", None).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_session")));
    let id = create(&app).await;
    call(&app, "GET", &format!("/sessions/{id}/round"), None).await;
    let (s, v, _) = call(&app, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": "Go!"}))).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_action")));
}

#[tokio::test]
async fn round_is_idempotent_and_double_post_conflicts() {
    let (app, _, _) = app();
    let id = create(&app).await;
    let uri = format!("/sessions/{id}/round");
    let (s, first, _) = call(&app, "GET", &uri, None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(first.get("feedback").is_none());
    assert_eq!(first["round_index"], 1);
    assert_eq!(first["expert_display_name"], "David");
    assert_eq!(call(&app, "GET", &uri, None).await.1, first);

    let act = format!("/sessions/{id}/action");
    let (s, r, _) = call(&app, "POST", &act, Some(json!({"action": "go"}))).await;
    assert_eq!(s, StatusCode::OK);
    let good = r["feedback"]["verdict"].as_str().unwrap().starts_with("This hotel is good");
    assert_eq!(r["points"], good as u32);
    let (s, v, _) = call(&app, "POST", &act, Some(json!({"action": "go"}))).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::CONFLICT, Some("no_pending_round")));
    let (_, summary, _) = call(&app, "GET", &format!("/sessions/{id}/summary"), None).await;
    assert_eq!(summary["round_index"], 2);
    assert_eq!(summary["points"], good as u32);

    let (_, second, _) = call(&app, "GET", &uri, None).await;
    assert_eq!(second["round_index"], 2);
    assert!(second["feedback"]["text"].as_str().unwrap().starts_with("Round results:"));
}

#[tokio::test]
async fn full_walkthrough_never_leaks_and_replays() {
    let (app, m, sink) = app();
    let id = create(&app).await;
    let mut actions = Vec::new();
    let mut last_stage = 1;
    loop {
        let (s, view, text) = call(&app, "GET", &format!("/sessions/{id}/round"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert!(!leaks(&text), "round payload leaks: {text}");
        let stage = view["stage_index"].as_u64().unwrap();
        assert!(stage == last_stage || stage == last_stage + 1);
        if stage != last_stage {
            assert_eq!(view["round_index"], 1);
            assert!(view["intro"].is_object());
        }
        last_stage = stage;
        let go = view["round_index"].as_u64().unwrap() % 2 == 1;
        let a = if go { "go" } else { "dont_go" };
        actions.push(if go { Action::Go } else { Action::DontGo });
        let (s, r, text) = call(&app, "POST", &format!("/sessions/{id}/action"), Some(json!({"action": a}))).await;
        assert_eq!(s, StatusCode::OK);
        assert!(!leaks(&text), "action payload leaks: {text}");
        if r["interaction_finished"] == true {
            break;
        }
    }
    assert_eq!(last_stage, 6);
    let (s, v, _) = call(&app, "GET", &format!("/sessions/{id}/round"), None).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::CONFLICT, Some("session_not_active")));
    let (_, summary, text) = call(&app, "GET", &format!("/sessions/{id}/summary"), None).await;
    assert!(!leaks(&text));
    assert_eq!(summary["status"], "completed");

    let persisted = sink.lock().unwrap().clone();
    // session seeds are derived from the manager seed and creation order
    let seed = persuasion_core::rng::derive_seed(7, 0);
    let replayed = replay_actions(m.corpus(), m.config(), &format!("human:{id}"), seed, &actions).unwrap();
    assert_eq!(replayed, persisted);
}
