//! TF-IDF vectors over word unigrams and bigrams with cosine scoring.

use std::collections::BTreeMap;

use crate::metrics::word_tokens;

/// Fifty common English function words dropped before indexing.
pub const STOP_WORDS: [&str; 50] = [
    "a", "an", "the", "and", "or", "but", "if", "of", "at", "by", "for", "with", "about", "to",
    "from", "in", "on", "into", "is", "are", "was", "were", "be", "been", "being", "it", "its",
    "this", "that", "these", "those", "as", "which", "who", "whom", "has", "have", "had", "do",
    "does", "did", "not", "no", "so", "than", "too", "very", "can", "will", "such",
];

/// Content terms of `text`: unigrams, then bigrams of adjacent content words.
pub fn terms(text: &str) -> Vec<String> {
    let words: Vec<String> = word_tokens(text)
        .into_iter()
        .filter(|w| w.chars().any(char::is_alphanumeric) && !STOP_WORDS.contains(&w.as_str()))
        .collect();
    let mut out = words.clone();
    out.extend(words.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

#[derive(Debug, Clone)]
pub struct TfIdf {
    idf: BTreeMap<String, f64>,
    docs: Vec<BTreeMap<String, f64>>,
}

impl TfIdf {
    pub fn build<'a>(documents: impl IntoIterator<Item = &'a str>) -> TfIdf {
        let counts: Vec<BTreeMap<String, usize>> = documents.into_iter().map(count_terms).collect();
        let n = counts.len() as f64;
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in &counts {
            for term in doc.keys() {
                *df.entry(term.clone()).or_default() += 1;
            }
        }
        let idf: BTreeMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
            .collect();
        let docs = counts.iter().map(|c| weigh(c, &idf)).collect();
        TfIdf { idf, docs }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Cosine similarity of `query` to every document, in document order.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let q = weigh(&count_terms(query), &self.idf);
        self.docs
            .iter()
            .map(|d| q.iter().filter_map(|(t, w)| d.get(t).map(|v| v * w)).sum())
            .collect()
    }
}

fn count_terms(text: &str) -> BTreeMap<String, usize> {
    let mut c = BTreeMap::new();
    for t in terms(text) {
        *c.entry(t).or_default() += 1;
    }
    c
}

/// Log-scaled tf times idf, L2-normalized. Unknown terms are dropped.
fn weigh(counts: &BTreeMap<String, usize>, idf: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut v: BTreeMap<String, f64> = counts
        .iter()
        .filter_map(|(t, &c)| idf.get(t).map(|i| (t.clone(), (1.0 + (c as f64).ln()) * i)))
        .collect();
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.values_mut().for_each(|x| *x /= norm);
    }
    v
}
