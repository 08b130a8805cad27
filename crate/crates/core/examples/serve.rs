//! Run the HTTP service with the retrieval backend until Ctrl-C.
//!
//! cargo run --example serve [-- 127.0.0.1:8080]
//! curl -s -XPOST localhost:8080/sessions -d '{}' -H 'content-type: application/json'
//! curl -s -XPOST localhost:8080/sessions/s1/turns -H 'content-type: application/json' \
//!      -d '{"kind":"text","content":"It is a member of benzenes."}'
//! curl -s localhost:8080/sessions/s1

use std::sync::Arc;

use convmol::chat::retrieval_index;
use convmol::dialogue::bundled_pairs;
use convmol::fingerprint::FingerprintConfig;
use convmol::service::{serve, AppState};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bind = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "127.0.0.1:8080".into());
    let fp = FingerprintConfig::default();
    let backend = retrieval_index(&bundled_pairs(), fp)?;
    let state = AppState::new(vec![Arc::new(backend)], fp, 3, None);
    let listener = tokio::net::TcpListener::bind(&bind).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
