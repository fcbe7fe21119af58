//! Answer-text normalization and word-level F1 / exact-match scoring.
//!
//! These back the answer reward, the search-key reward, and evaluation.
//! F1 is the usual QA convention: lowercase, strip punctuation, drop the
//! articles {a, an, the}, then compare word multisets:
//!
//! ```text
//! F1 = 2 * IN / (PN + RN)
//! ```
//!
//! where `PN`/`RN` are the predicted/reference word counts and `IN` is the
//! size of the multiset intersection.

use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("best_over_golds requires at least one gold answer")]
    EmptyGolds,
}

/// Normalized answer text: ordered lowercase alphanumeric words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedText {
    pub words: Vec<String>,
}

impl NormalizedText {
    pub fn joined(&self) -> String {
        self.words.join(" ")
    }
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercase, remove punctuation, split on whitespace, drop articles.
pub fn normalize(text: &str) -> NormalizedText {
    let lowered = text.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                // Punctuation is removed, not turned into a separator, so
                // "it's" -> "its" and "al - abadi" -> "al abadi".
                '\u{0}'
            }
        })
        .filter(|c| *c != '\u{0}')
        .collect();
    let words = cleaned
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .map(str::to_string)
        .collect();
    NormalizedText { words }
}

fn word_counts(t: &NormalizedText) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for w in &t.words {
        *counts.entry(w.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Word-level F1 over normalized multisets, in [0, 1].
pub fn word_f1(pred: &str, gold: &str) -> f64 {
    let p = normalize(pred);
    let g = normalize(gold);
    let pn = p.words.len();
    let rn = g.words.len();
    if pn + rn == 0 {
        return 0.0;
    }
    let pc = word_counts(&p);
    let gc = word_counts(&g);
    let mut common = 0usize;
    for (w, n) in &pc {
        if let Some(m) = gc.get(w) {
            common += (*n).min(*m);
        }
    }
    if common == 0 {
        return 0.0;
    }
    2.0 * common as f64 / (pn + rn) as f64
}

/// 1.0 iff the normalized word sequences are equal, else 0.0.
pub fn exact_match(pred: &str, gold: &str) -> f64 {
    if normalize(pred).words == normalize(gold).words {
        1.0
    } else {
        0.0
    }
}

/// Max of `metric` over a non-empty gold list.
pub fn best_over_golds<F>(pred: &str, golds: &[String], metric: F) -> Result<f64, MetricsError>
where
    F: Fn(&str, &str) -> f64,
{
    if golds.is_empty() {
        return Err(MetricsError::EmptyGolds);
    }
    Ok(golds
        .iter()
        .map(|g| metric(pred, g))
        .fold(f64::NEG_INFINITY, f64::max))
}
