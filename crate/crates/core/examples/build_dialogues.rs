//! Build dialogues from the bundled toy pairs with the retrieval provider.
//!
//! cargo run --example build_dialogues [-- SEED]

use convmol::chat::retrieval_index;
use convmol::dialogue::{build_dataset, read_pairs, BuilderConfig};
use convmol::fingerprint::FingerprintConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(7), |s| s.parse())?;
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy_pairs.jsonl");
    let pairs = read_pairs(path.as_ref())?;
    let fp = FingerprintConfig::default();
    let provider = retrieval_index(&pairs, fp)?;
    let (dialogues, stats) = build_dataset(&pairs, &provider, &BuilderConfig::default(), &fp, seed);
    for d in &dialogues {
        println!("{} ({} turns)", d.id, d.turns.len());
        for t in &d.turns {
            println!(
                "  [{}] {:.3} {}  {}",
                t.k, t.sim_to_final, t.expected_molecule, t.text
            );
        }
    }
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}
