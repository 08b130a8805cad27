//! Generate multi-task pre-training records from the bundled sources and show
//! one record per task.
//!
//! cargo run --example pretrain [-- SEED]

use std::collections::BTreeMap;
use std::path::PathBuf;

use convmol::tasks::{generate_pretrain, PretrainSources, TaskConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let sources = PretrainSources {
        text: Some(data.join("texts.txt")),
        smiles: Some(data.join("molecules.smi")),
        properties: Some(data.join("properties.jsonl")),
        lexicon: Some(data.join("lexicon.jsonl")),
        pairs: Some(data.join("toy_pairs.jsonl")),
    };
    let records = generate_pretrain(&sources, &TaskConfig::default(), seed)?;
    let mut first = BTreeMap::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &records {
        let task = serde_json::to_value(r.task)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        *counts.entry(task.clone()).or_default() += 1;
        first.entry(task).or_insert(r);
    }
    for (task, r) in first {
        println!("== {task} ({})", counts[&task]);
        println!("  input:  {} {}", r.prefix, r.input);
        println!("  target: {}", r.target);
    }
    println!("{} records", records.len());
    Ok(())
}
