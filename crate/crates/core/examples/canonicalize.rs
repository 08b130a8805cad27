//! Canonicalize SMILES from stdin, one per line.
//!
//! ```text
//! printf 'OCC\nC1=CC=CC=C1\nC(\n' | cargo run --example canonicalize
//! ```

use std::io::{self, BufRead, Write};

use convmol::smiles;

fn main() -> io::Result<()> {
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        match smiles::parse(s) {
            Ok(g) => writeln!(out, "{}", smiles::canonical(&g))?,
            Err(e) => writeln!(out, "error: {e}")?,
        }
    }
    Ok(())
}
