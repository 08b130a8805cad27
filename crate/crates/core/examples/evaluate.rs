//! Score the bundled generation and understanding fixtures, or any pair of
//! prediction/reference files.
//!
//! cargo run --example evaluate
//! cargo run --example evaluate -- generation preds.jsonl refs.jsonl

use std::path::PathBuf;

use convmol::fingerprint::FingerprintConfig;
use convmol::metrics::{evaluate_generation, evaluate_understanding, read_records, Task};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let jobs = match args.as_slice() {
        [task, p, r] => vec![(task.clone(), PathBuf::from(p), PathBuf::from(r))],
        _ => vec![
            (
                "generation".into(),
                fixture("gen_predictions.jsonl"),
                fixture("gen_references.jsonl"),
            ),
            (
                "understanding".into(),
                fixture("und_predictions.jsonl"),
                fixture("und_references.jsonl"),
            ),
        ],
    };
    for (task, p, r) in jobs {
        let task: Task = serde_json::from_value(serde_json::Value::String(task))?;
        let (preds, refs) = (read_records(&p)?, read_records(&r)?);
        let report = match task {
            Task::Generation => evaluate_generation(&preds, &refs, &FingerprintConfig::default())?,
            Task::Understanding => evaluate_understanding(&preds, &refs)?,
        };
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}
