//! Fingerprint similarity between two molecules under the path, key and
//! circular families.
//!
//! cargo run --example similarity -- 'CC(=O)Oc1ccccc1C(=O)O' 'OC(=O)c1ccccc1O'

use convmol::fingerprint::{structural_keys, FingerprintConfig, KEY_NAMES};
use convmol::smiles::parse;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let a = args
        .next()
        .unwrap_or_else(|| "CC(=O)Oc1ccccc1C(=O)O".into());
    let b = args.next().unwrap_or_else(|| "OC(=O)c1ccccc1O".into());
    let (ga, gb) = (parse(&a)?, parse(&b)?);
    let fp = FingerprintConfig::default();
    let sim = fp.similarity(&ga, &gb);
    println!("{a}\n{b}");
    println!("rdk    {:.4}", sim.rdk);
    println!("maccs  {:.4}", sim.maccs);
    println!("morgan {:.4}", sim.morgan);
    let keys = structural_keys(&ga);
    let names: Vec<&str> = keys.ones().map(|i| KEY_NAMES[i]).collect();
    println!("keys of {a}: {}", names.join(", "));
    println!("morgan bits: {}", fp.morgan(&ga).to_hex());
    Ok(())
}
