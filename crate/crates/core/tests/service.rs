mod common;

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use convmol::chat::{
    compose_generation_query, retrieval_index, Backend, BackendError, ChatSession, EventKind,
    FixedBackend, Generated, Role,
};
use convmol::dialogue::bundled_pairs;
use convmol::fingerprint::FingerprintConfig;
use convmol::service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (
        status,
        resp.into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec(),
    )
}

async fn json_call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn retrieval_app(log_dir: Option<PathBuf>) -> Router {
    let fp = FingerprintConfig::default();
    let retrieval = retrieval_index(&bundled_pairs(), fp).unwrap();
    let fixed = FixedBackend {
        id: "fixed".into(),
        smiles: vec!["CCO".into(), "C(".into(), "CCN".into()],
        description: "A fixed description.".into(),
    };
    router(AppState::new(
        vec![Arc::new(retrieval), Arc::new(fixed)],
        fp,
        3,
        log_dir,
    ))
}

#[tokio::test]
async fn session_round_trip_matches_log_file() {
    let dir = tempfile::tempdir().unwrap();
    let app = retrieval_app(Some(dir.path().to_path_buf()));

    let (s, backends) = json_call(&app, Method::GET, "/backends", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(backends, json!(["fixed", "retrieval"]));

    let (s, created) = json_call(&app, Method::POST, "/sessions", Some(json!({}))).await;
    assert_eq!(s, StatusCode::OK);
    let id = created["id"].as_str().unwrap().to_string();
    assert_eq!(id, "s1");

    let uri = format!("/sessions/{id}/turns");
    let (s, first) = json_call(
        &app,
        Method::POST,
        &uri,
        Some(json!({"kind": "text", "content": "It is a member of benzenes."})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let cands = first["candidates"].as_array().unwrap();
    assert_eq!(cands.len(), 3);
    assert!(cands[0]["sim_to_prev"].is_null());
    let (s, second) = json_call(
        &app,
        Method::POST,
        &uri,
        Some(json!({"kind": "text", "content": "Add a hydroxy group.", "k": 2, "choose": 1})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(second["candidates"].as_array().unwrap().len(), 2);
    let (s, desc) = json_call(
        &app,
        Method::POST,
        &uri,
        Some(json!({"kind": "molecule", "content": "CCO"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert!(!desc["description"].as_str().unwrap().is_empty());

    let (s, bad) = json_call(
        &app,
        Method::POST,
        &uri,
        Some(json!({"kind": "molecule", "content": "C("})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(bad["error"].is_string());
    let (s, _) = json_call(
        &app,
        Method::POST,
        &uri,
        Some(json!({"kind": "text", "content": "x", "choose": 9})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, body) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    let on_disk = std::fs::read(dir.path().join("s1.jsonl")).unwrap();
    assert_eq!(body, on_disk);

    let session = ChatSession::from_jsonl(std::str::from_utf8(&body).unwrap()).unwrap();
    assert_eq!(session.backend(), "retrieval");
    let events = session.events();
    let choice = events.iter().find(|e| e.kind == EventKind::Choice).unwrap();
    let first_pick = cands[1]["smiles"].as_str().unwrap();
    assert_eq!(choice.content, first_pick);
    let mut system_molecules = 0;
    for (i, e) in events.iter().enumerate() {
        if e.role == Role::System && e.kind == EventKind::Molecule {
            system_molecules += 1;
            assert_eq!(
                Some(compose_generation_query(&events[..i]).unwrap()),
                e.query.clone()
            );
        }
    }
    assert_eq!(system_molecules, 2);
    let second_query = events
        .iter()
        .filter_map(|e| e.query.as_ref())
        .nth(1)
        .unwrap();
    assert!(
        second_query.contains(&format!("It looks like {first_pick}.")),
        "{second_query}"
    );

    let (_, other) = json_call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"backend": "fixed"})),
    )
    .await;
    assert_eq!(other["id"], "s2");
    let (s, padded) = json_call(
        &app,
        Method::POST,
        "/sessions/s2/turns",
        Some(json!({"kind": "text", "content": "Anything.", "k": 5})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(padded["padded"], true);
    assert_eq!(padded["candidates"][1]["valid"], false);
    assert_eq!(padded["candidates"][1]["sim_to_prev"], Value::Null);
}

#[tokio::test]
async fn unknown_things_are_404() {
    let app = retrieval_app(None);
    let (s, _) = json_call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"backend": "nope"})),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, Method::GET, "/sessions/s99", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = json_call(
        &app,
        Method::POST,
        "/sessions/s99/turns",
        Some(json!({"kind": "text", "content": "x"})),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn parse_and_similarity() {
    let app = retrieval_app(None);
    let (s, g) = json_call(
        &app,
        Method::GET,
        "/molecules/parse?smiles=C1%3DCC%3DCC%3DC1",
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(g["canonical"], "c1ccccc1");
    let atoms = g["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 6);
    assert!(atoms
        .iter()
        .all(|a| a["aromatic"] == true && a["element"] == "C" && a["ring_sizes"] == json!([6])));
    let bonds = g["bonds"].as_array().unwrap();
    assert_eq!(bonds.len(), 6);
    assert!(bonds.iter().all(|b| b["order"] == "aromatic"));

    let (s, g) = json_call(
        &app,
        Method::GET,
        "/molecules/parse?smiles=CC(%3DO)%5BO-%5D",
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let charges: Vec<i64> = g["atoms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["charge"].as_i64().unwrap())
        .collect();
    assert_eq!(charges, vec![0, 0, 0, -1]);
    assert!(g["bonds"]
        .as_array()
        .unwrap()
        .iter()
        .any(|b| b["order"] == "double"));

    let (s, _) = json_call(&app, Method::GET, "/molecules/parse?smiles=C1CC", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, sim) = json_call(
        &app,
        Method::POST,
        "/similarity",
        Some(json!({"a": "OCC", "b": "CCO"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(sim, json!({"rdk": 1.0, "maccs": 1.0, "morgan": 1.0}));
    let (_, sim) = json_call(
        &app,
        Method::POST,
        "/similarity",
        Some(json!({"a": "CCO", "b": "c1ccccc1"})),
    )
    .await;
    for key in ["rdk", "maccs", "morgan"] {
        let v = sim[key].as_f64().unwrap();
        assert!((0.0..1.0).contains(&v), "{key} {v}");
    }
    let (s, _) = json_call(
        &app,
        Method::POST,
        "/similarity",
        Some(json!({"a": "CCO", "b": "C)"})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn evaluate_paths_and_inline() {
    let app = retrieval_app(None);
    for (task, prefix) in [("generation", "gen"), ("understanding", "und")] {
        let golden: Value = serde_json::from_str(
            &std::fs::read_to_string(fixture(&format!("{prefix}_golden.json"))).unwrap(),
        )
        .unwrap();
        let preds = fixture(&format!("{prefix}_predictions.jsonl"));
        let refs = fixture(&format!("{prefix}_references.jsonl"));
        let (s, by_path) = json_call(
            &app,
            Method::POST,
            "/evaluate",
            Some(json!({"task": task, "predictions": preds, "references": refs})),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
        common::assert_json_close(&by_path, &golden, 1e-9);

        let inline = |p: &PathBuf| -> Value {
            std::fs::read_to_string(p)
                .unwrap()
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str::<Value>(l).unwrap())
                .collect::<Vec<Value>>()
                .into()
        };
        let (s, by_value) = json_call(
            &app,
            Method::POST,
            "/evaluate",
            Some(json!({"task": task, "predictions": inline(&preds), "references": inline(&refs)})),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(by_value, by_path);
    }
    let (s, err) = json_call(
        &app,
        Method::POST,
        "/evaluate",
        Some(json!({"task": "generation", "predictions": [{"id": "a", "candidates": ["C"]}], "references": [{"id": "b", "text": "C"}]})),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(err["error"].as_str().unwrap().contains("ids differ"));
}

/// Blocks inside `generate` until released.
struct Gate {
    entered: AtomicBool,
    release: Mutex<std::sync::mpsc::Receiver<()>>,
}

impl Backend for Gate {
    fn id(&self) -> &str {
        "gate"
    }
    fn understand(&self, _: &str) -> Result<String, BackendError> {
        Ok("d".into())
    }
    fn generate(&self, _: &str, k: usize) -> Result<Generated, BackendError> {
        self.entered.store(true, Ordering::SeqCst);
        self.release
            .lock()
            .unwrap()
            .recv_timeout(Duration::from_secs(10))
            .ok();
        Generated::fit(vec!["CCO".into()], k)
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_turn_on_one_session_is_409() {
    let (tx, rx) = std::sync::mpsc::channel();
    let gate = Arc::new(Gate {
        entered: AtomicBool::new(false),
        release: Mutex::new(rx),
    });
    let app = router(AppState::new(
        vec![gate.clone()],
        FingerprintConfig::default(),
        3,
        None,
    ));
    let (_, created) = json_call(&app, Method::POST, "/sessions", None).await;
    assert_eq!(created["id"], "s1");
    let (_, other) = json_call(&app, Method::POST, "/sessions", None).await;

    let slow = {
        let app = app.clone();
        tokio::spawn(async move {
            json_call(
                &app,
                Method::POST,
                "/sessions/s1/turns",
                Some(json!({"kind": "text", "content": "first"})),
            )
            .await
        })
    };
    while !gate.entered.load(Ordering::SeqCst) {
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    let (s, err) = json_call(
        &app,
        Method::POST,
        "/sessions/s1/turns",
        Some(json!({"kind": "text", "content": "second"})),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(err["error"].is_string());
    let other_uri = format!("/sessions/{}/turns", other["id"].as_str().unwrap());
    let (s, _) = json_call(
        &app,
        Method::POST,
        &other_uri,
        Some(json!({"kind": "molecule", "content": "CCO"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);

    tx.send(()).unwrap();
    let (s, _) = slow.await.unwrap();
    assert_eq!(s, StatusCode::OK);
    let (_, body) = call(&app, Method::GET, "/sessions/s1", None).await;
    let session = ChatSession::from_jsonl(std::str::from_utf8(&body).unwrap()).unwrap();
    assert_eq!(session.events().len(), 2);
}

#[tokio::test]
async fn backend_failure_is_502_and_not_committed() {
    struct Down;
    impl Backend for Down {
        fn id(&self) -> &str {
            "down"
        }
        fn understand(&self, _: &str) -> Result<String, BackendError> {
            Err(BackendError::Timeout)
        }
        fn generate(&self, _: &str, _: usize) -> Result<Generated, BackendError> {
            Err(BackendError::Unreachable("connection refused".into()))
        }
    }
    let app = router(AppState::new(
        vec![Arc::new(Down)],
        FingerprintConfig::default(),
        3,
        None,
    ));
    json_call(&app, Method::POST, "/sessions", None).await;
    let (s, _) = json_call(
        &app,
        Method::POST,
        "/sessions/s1/turns",
        Some(json!({"kind": "text", "content": "x"})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    let (s, _) = json_call(
        &app,
        Method::POST,
        "/sessions/s1/turns",
        Some(json!({"kind": "molecule", "content": "CCO"})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    let (_, body) = call(&app, Method::GET, "/sessions/s1", None).await;
    assert_eq!(std::str::from_utf8(&body).unwrap().lines().count(), 1);
}

#[test]
fn serve_flushes_logs_on_shutdown() {
    let dir = tempfile::tempdir().unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let fp = FingerprintConfig::default();
        let state = AppState::new(
            vec![Arc::new(retrieval_index(&bundled_pairs(), fp).unwrap())],
            fp,
            3,
            Some(dir.path().to_path_buf()),
        );
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(convmol::service::serve(listener, state, async {
            stopped.await.ok();
        }));
        let base = format!("http://{addr}");
        let client = tokio::task::spawn_blocking(move || {
            let c = reqwest::blocking::Client::new();
            let id: Value = c
                .post(format!("{base}/sessions"))
                .json(&json!({}))
                .send()
                .unwrap()
                .json()
                .unwrap();
            let id = id["id"].as_str().unwrap().to_string();
            let r = c
                .post(format!("{base}/sessions/{id}/turns"))
                .json(&json!({"kind": "text", "content": "A sweet aromatic solvent."}))
                .send()
                .unwrap();
            assert!(r.status().is_success());
            c.get(format!("{base}/sessions/{id}"))
                .send()
                .unwrap()
                .text()
                .unwrap()
        })
        .await
        .unwrap();
        stop.send(()).unwrap();
        server.await.unwrap().unwrap();
        assert_eq!(
            std::fs::read_to_string(dir.path().join("s1.jsonl")).unwrap(),
            client
        );
    });
}
