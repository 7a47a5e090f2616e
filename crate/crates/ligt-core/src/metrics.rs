//! Corpus evaluation: token-level F1, exact-match accuracy, and ANLS
//! (average normalized Levenshtein similarity).
//!
//! All three metrics are means over per-pair scores. Text normalization
//! (lowercase, trim, collapse whitespace runs) applies uniformly to all of
//! them and can be switched off. F1 intersects token *multisets*, since
//! repeated numerals are common and set semantics would over-credit them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Prediction/ground-truth pair; predictions may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerPair {
    pub prediction: String,
    pub ground_truth: String,
}

impl AnswerPair {
    pub fn new(prediction: impl Into<String>, ground_truth: impl Into<String>) -> Self {
        AnswerPair {
            prediction: prediction.into(),
            ground_truth: ground_truth.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// ANLS threshold: a pair whose normalized distance reaches `tau`
    /// scores zero.
    pub tau: f64,
    pub normalize_text: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tau: 0.5,
            normalize_text: true,
        }
    }
}

/// Corpus scores in `[0, 1]`; the CLI renders them as percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub anls: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub n: usize,
}

/// Lowercase, trim, and collapse whitespace runs to single spaces.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

fn prepared(s: &str, config: &EvalConfig) -> String {
    if config.normalize_text {
        normalize_answer(s)
    } else {
        s.to_string()
    }
}

fn token_counts(s: &str) -> (usize, HashMap<&str, usize>) {
    let mut counts = HashMap::new();
    let mut total = 0;
    for t in s.split_whitespace() {
        *counts.entry(t).or_insert(0) += 1;
        total += 1;
    }
    (total, counts)
}

/// Token-level F1 of one pair. Empty token lists follow the convention
/// F1 = 1 when both are empty and 0 when only one is.
pub fn f1_pair(pair: &AnswerPair, config: &EvalConfig) -> f64 {
    let pred = prepared(&pair.prediction, config);
    let truth = prepared(&pair.ground_truth, config);
    let (n_pred, pred_counts) = token_counts(&pred);
    let (n_truth, truth_counts) = token_counts(&truth);
    if n_pred == 0 || n_truth == 0 {
        return if n_pred == 0 && n_truth == 0 { 1.0 } else { 0.0 };
    }
    let shared: usize = pred_counts
        .iter()
        .map(|(t, c)| c.min(truth_counts.get(t).unwrap_or(&0)))
        .sum();
    let precision = shared as f64 / n_pred as f64;
    let recall = shared as f64 / n_truth as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Fraction of pairs whose normalized strings match exactly.
pub fn accuracy(pairs: &[AnswerPair], config: &EvalConfig) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs
        .iter()
        .filter(|p| prepared(&p.prediction, config) == prepared(&p.ground_truth, config))
        .count();
    hits as f64 / pairs.len() as f64
}

/// Character-level edit distance (insert, delete, substitute).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut prev_diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let up = row[j + 1];
            let subst = prev_diag + usize::from(ca != cb);
            row[j + 1] = subst.min(up + 1).min(row[j] + 1);
            prev_diag = up;
        }
    }
    row[b.len()]
}

/// Edit distance divided by the longer length; 0 when both are empty.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / max_len as f64
}

/// Per-pair ANLS score: `1 - NL` below the threshold, zero at or above it.
pub fn anls_pair(pair: &AnswerPair, config: &EvalConfig) -> f64 {
    let pred = prepared(&pair.prediction, config);
    let truth = prepared(&pair.ground_truth, config);
    let nl = normalized_levenshtein(&pred, &truth);
    if nl < config.tau {
        1.0 - nl
    } else {
        0.0
    }
}

/// Mean per-pair ANLS over the corpus.
pub fn anls(pairs: &[AnswerPair], config: &EvalConfig) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|p| anls_pair(p, config)).sum::<f64>() / pairs.len() as f64
}

/// Mean token-level F1 over the corpus.
pub fn f1(pairs: &[AnswerPair], config: &EvalConfig) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|p| f1_pair(p, config)).sum::<f64>() / pairs.len() as f64
}

/// All three corpus scores at once.
pub fn evaluate(pairs: &[AnswerPair], config: &EvalConfig) -> EvalReport {
    EvalReport {
        anls: anls(pairs, config),
        f1: f1(pairs, config),
        accuracy: accuracy(pairs, config),
        n: pairs.len(),
    }
}
