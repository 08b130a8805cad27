//! Molecular fingerprints: circular (Morgan), linear path and structural keys,
//! plus Tanimoto similarity.

mod keys;
mod morgan;
mod path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smiles::MolecularGraph;

pub use keys::{structural_keys, KEY_NAMES};
pub use morgan::{morgan, morgan_identifiers};
pub use path::{path_fp, path_labels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Morgan,
    Path,
    Keys,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Morgan => "morgan",
            Family::Path => "path",
            Family::Keys => "keys",
        }
    }

    fn default_param(self) -> u32 {
        match self {
            Family::Morgan => 2,
            Family::Path => 7,
            Family::Keys => 1,
        }
    }
}

impl std::str::FromStr for Family {
    type Err = FingerprintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "morgan" => Ok(Family::Morgan),
            "path" => Ok(Family::Path),
            "keys" => Ok(Family::Keys),
            other => Err(FingerprintError::Format(format!(
                "unknown family {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprints are not comparable: {0}")]
    Mismatch(String),
    #[error("bad fingerprint string: {0}")]
    Format(String),
}

/// Fixed-width bitset tagged with its family and family parameter
/// (radius for morgan, maximum path length for path, key-set version for keys).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    family: Family,
    param: u32,
    width: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn new(family: Family, param: u32, width: usize) -> Self {
        Fingerprint {
            family,
            param,
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn from_bits(family: Family, param: u32, width: usize, bits: &[usize]) -> Self {
        let mut fp = Fingerprint::new(family, param, width);
        for &b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn param(&self) -> u32 {
        self.param
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Panics if `bit >= width`.
    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.width, "bit {bit} outside width {}", self.width);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&b| self.get(b))
    }

    /// True iff every bit set in `self` is set in `other`.
    pub fn is_subset_of(&self, other: &Fingerprint) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    /// `"<family>:<width>:<hex>"`, bytes little-endian (byte k holds bits 8k..8k+8).
    pub fn to_hex(&self) -> String {
        let mut hex = String::with_capacity(self.width.div_ceil(8) * 2);
        for k in 0..self.width.div_ceil(8) {
            let byte = (self.words[k / 8] >> ((k % 8) * 8)) as u8;
            hex.push_str(&format!("{byte:02x}"));
        }
        format!("{}:{}:{}", self.family.name(), self.width, hex)
    }

    /// Inverse of [`Fingerprint::to_hex`]. The string does not carry the
    /// family parameter; the family default is assumed.
    pub fn from_hex(s: &str) -> Result<Self, FingerprintError> {
        let mut parts = s.splitn(3, ':');
        let (Some(family), Some(width), Some(hex)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(FingerprintError::Format(s.to_string()));
        };
        let family: Family = family.parse()?;
        let width: usize = width
            .parse()
            .map_err(|_| FingerprintError::Format(format!("bad width {width:?}")))?;
        if hex.len() != width.div_ceil(8) * 2 {
            return Err(FingerprintError::Format(format!(
                "expected {} hex digits, got {}",
                width.div_ceil(8) * 2,
                hex.len()
            )));
        }
        let mut fp = Fingerprint::new(family, family.default_param(), width);
        for k in 0..width.div_ceil(8) {
            let byte = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16)
                .map_err(|_| FingerprintError::Format(format!("bad hex at {}", 2 * k)))?;
            for bit in 0..8 {
                if byte >> bit & 1 == 1 {
                    let b = 8 * k + bit;
                    if b >= width {
                        return Err(FingerprintError::Format("bit beyond width".into()));
                    }
                    fp.set(b);
                }
            }
        }
        Ok(fp)
    }
}

/// |a ∧ b| / |a ∨ b|; 1.0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.family != b.family || a.width != b.width || a.param != b.param {
        return Err(FingerprintError::Mismatch(format!(
            "{}/{}/{} vs {}/{}/{}",
            a.family.name(),
            a.width,
            a.param,
            b.family.name(),
            b.width,
            b.param
        )));
    }
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    Ok(if either == 0 {
        1.0
    } else {
        f64::from(both) / f64::from(either)
    })
}

/// FNV-1a, 64 bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Fingerprint parameters shared by the metrics, the dialogue gate and the service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FingerprintConfig {
    pub morgan_radius: u32,
    pub morgan_width: usize,
    pub path_max_len: u32,
    pub path_width: usize,
}

impl Default for FingerprintConfig {
    fn default() -> Self {
        FingerprintConfig {
            morgan_radius: 2,
            morgan_width: 2048,
            path_max_len: 7,
            path_width: 2048,
        }
    }
}

/// Similarity of two molecules under the three families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub rdk: f64,
    pub maccs: f64,
    pub morgan: f64,
}

impl FingerprintConfig {
    pub fn path(&self, g: &MolecularGraph) -> Fingerprint {
        path_fp(g, self.path_max_len, self.path_width)
    }

    pub fn morgan(&self, g: &MolecularGraph) -> Fingerprint {
        morgan(g, self.morgan_radius, self.morgan_width)
    }

    pub fn similarity(&self, a: &MolecularGraph, b: &MolecularGraph) -> Similarity {
        let t = |x: Fingerprint, y: Fingerprint| tanimoto(&x, &y).expect("same parameters");
        Similarity {
            rdk: t(self.path(a), self.path(b)),
            maccs: t(structural_keys(a), structural_keys(b)),
            morgan: t(self.morgan(a), self.morgan(b)),
        }
    }
}
