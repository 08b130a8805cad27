//! Talk to an external model server through the remote backend. Starts a
//! small stand-in server that speaks the wire protocol
//! (POST /generate {query, k} -> {candidates}, POST /understand {smiles} -> {description})
//! and runs one session against it.
//!
//! cargo run --example remote_backend

use std::time::Duration;

use axum::routing::post;
use axum::{Json, Router};
use convmol::chat::{generate_turn, remote_backend, understand_turn, Backend, ChatSession};
use convmol::fingerprint::FingerprintConfig;
use serde_json::{json, Value};

async fn generate(Json(req): Json<Value>) -> Json<Value> {
    let query = req["query"].as_str().unwrap_or_default();
    // grows the chain by one carbon per sentence in the query
    let carbons = query.matches('.').count().max(1);
    let base = format!("{}C(=O)O", "C".repeat(carbons));
    Json(json!({ "candidates": [base, "CCO"] }))
}

async fn understand(Json(req): Json<Value>) -> Json<Value> {
    Json(
        json!({ "description": format!("A molecule written as {}.", req["smiles"].as_str().unwrap_or("?")) }),
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?;
    let app = Router::new()
        .route("/generate", post(generate))
        .route("/understand", post(understand));
    rt.spawn(async move { axum::serve(listener, app).await });

    let backend = remote_backend(&format!("http://{addr}"), Duration::from_secs(5))?;
    let fp = FingerprintConfig::default();
    let mut session = ChatSession::new("remote", backend.id(), "2024-01-01T00:00:00Z");
    for text in ["It is a carboxylic acid.", "It has a longer chain."] {
        let set = generate_turn(&mut session, &backend, text, 3, None, &fp)?;
        let shown: Vec<&str> = set.candidates.iter().map(|c| c.smiles.as_str()).collect();
        println!("{text} -> {shown:?} (padded: {})", set.padded);
    }
    println!("{}", understand_turn(&mut session, &backend, "CCCC(=O)O")?);
    Ok(())
}
