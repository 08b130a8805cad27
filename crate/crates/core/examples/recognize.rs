//! Find chemical names in text with the bundled lexicon.
//!
//! echo 'Ethanol and acetic acid give ethyl acetate.' | cargo run --example recognize

use std::io::BufRead;

use convmol::lexicon::{load_kb, recognize};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/lexicon.jsonl");
    let (lexicon, report) = load_kb(path.as_ref())?;
    eprintln!(
        "{} entries, {} rejected",
        report.loaded,
        report.rejected.len()
    );
    for line in std::io::stdin().lock().lines() {
        let line = line?;
        for m in recognize(&line, &lexicon) {
            println!(
                "{}..{}\t{}\t{}\t{}",
                m.start, m.end, m.surface, m.preferred_name, m.smiles
            );
        }
    }
    Ok(())
}
