//! String metrics: BLEU, ROUGE, Levenshtein and tokenizers.

use std::collections::HashMap;
use std::hash::Hash;

/// Numerator added to zero n-gram match counts.
pub const BLEU_EPSILON: f64 = 0.1;

/// Lowercased words with punctuation split off as separate tokens.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

pub fn char_tokens(text: &str) -> Vec<char> {
    text.chars().collect()
}

fn ngram_counts<T: Hash + Eq>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and hypothesis n-gram total.
fn matches<T: Hash + Eq>(reference: &[T], hypothesis: &[T], n: usize) -> (usize, usize) {
    let r = ngram_counts(reference, n);
    let h = ngram_counts(hypothesis, n);
    let matched = h
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, hypothesis.len().saturating_sub(n - 1))
}

/// Running sums for corpus BLEU.
#[derive(Debug, Clone, Default)]
pub struct BleuStats {
    matched: Vec<usize>,
    total: Vec<usize>,
    hyp_len: usize,
    ref_len: usize,
}

impl BleuStats {
    pub fn new(max_n: usize) -> Self {
        BleuStats {
            matched: vec![0; max_n],
            total: vec![0; max_n],
            hyp_len: 0,
            ref_len: 0,
        }
    }

    pub fn add<T: Hash + Eq>(&mut self, reference: &[T], hypothesis: &[T]) {
        for n in 1..=self.matched.len() {
            let (m, t) = matches(reference, hypothesis, n);
            self.matched[n - 1] += m;
            self.total[n - 1] += t;
        }
        self.hyp_len += hypothesis.len();
        self.ref_len += reference.len();
    }

    /// Geometric mean of the n-gram precisions over the orders that have any
    /// hypothesis n-grams, times the brevity penalty. Zero match counts are
    /// replaced by [`BLEU_EPSILON`].
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let orders: Vec<usize> = (0..self.total.len())
            .filter(|&i| self.total[i] > 0)
            .collect();
        let log_p: f64 = orders
            .iter()
            .map(|&i| {
                let m = if self.matched[i] == 0 {
                    BLEU_EPSILON
                } else {
                    self.matched[i] as f64
                };
                (m / self.total[i] as f64).ln()
            })
            .sum::<f64>()
            / orders.len() as f64;
        let bp = if self.hyp_len >= self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        };
        bp * log_p.exp()
    }
}

/// Sentence BLEU with brevity penalty and add-epsilon smoothing. The n-gram
/// order is capped at the hypothesis length, so identical sequences score 1.
pub fn bleu<T: Hash + Eq>(reference: &[T], hypothesis: &[T], max_n: usize) -> f64 {
    let mut stats = BleuStats::new(max_n);
    stats.add(reference, hypothesis);
    stats.score()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rouge {
    pub rouge1_f: f64,
    pub rouge2_f: f64,
    pub rouge_l_f: f64,
}

fn f1(overlap: usize, hyp: usize, reference: usize) -> f64 {
    if overlap == 0 || hyp == 0 || reference == 0 {
        return 0.0;
    }
    let p = overlap as f64 / hyp as f64;
    let r = overlap as f64 / reference as f64;
    2.0 * p * r / (p + r)
}

fn rouge_n<T: Hash + Eq>(reference: &[T], hypothesis: &[T], n: usize) -> f64 {
    let (overlap, hyp_total) = matches(reference, hypothesis, n);
    f1(overlap, hyp_total, reference.len().saturating_sub(n - 1))
}

pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-1/2 F1 over clipped n-gram overlap and ROUGE-L F1 over the LCS.
pub fn rouge<T: Hash + Eq>(reference: &[T], hypothesis: &[T]) -> Rouge {
    Rouge {
        rouge1_f: rouge_n(reference, hypothesis, 1),
        rouge2_f: rouge_n(reference, hypothesis, 2),
        rouge_l_f: f1(
            lcs_len(reference, hypothesis),
            hypothesis.len(),
            reference.len(),
        ),
    }
}

/// Unit-cost edit distance over characters.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
