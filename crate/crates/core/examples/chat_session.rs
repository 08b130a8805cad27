//! A scripted three-turn session against the retrieval backend: two
//! generation turns (the second refining from candidate 2) and one
//! understanding turn. Prints the candidates and the session log.
//!
//! cargo run --example chat_session

use convmol::chat::{generate_turn, retrieval_index, understand_turn, ChatSession};
use convmol::dialogue::bundled_pairs;
use convmol::fingerprint::FingerprintConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fp = FingerprintConfig::default();
    let backend = retrieval_index(&bundled_pairs(), fp)?;
    let mut session = ChatSession::new("demo", "retrieval", "2024-01-01T00:00:00Z");

    for (text, choose) in [
        ("It is a member of benzenes.", None),
        ("It has a role as a solvent.", Some(1)),
    ] {
        println!("> {text}");
        let set = generate_turn(&mut session, &backend, text, 3, choose, &fp)?;
        for (i, c) in set.candidates.iter().enumerate() {
            let sim = c
                .sim_to_prev
                .map_or(String::new(), |s| format!("  sim {s:.3}"));
            println!("  {}. {}  valid={}{sim}", i + 1, c.smiles, c.valid);
        }
    }
    println!("> mol: CC(=O)O");
    println!("  {}", understand_turn(&mut session, &backend, "CC(=O)O")?);

    println!("\nsession log:");
    print!("{}", session.to_jsonl());
    Ok(())
}
