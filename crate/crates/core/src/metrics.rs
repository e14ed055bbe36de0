//! Classification and generation-quality metrics.

use std::collections::HashMap;
use std::hash::Hash;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("predictions ({predictions}) and golds ({golds}) differ in length")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("no items to score")]
    Empty,
    #[error("class list is empty")]
    NoClasses,
}

/// Fraction of exact matches, kept as a reduced ratio.
pub fn accuracy<T: PartialEq>(predictions: &[T], golds: &[T]) -> Result<Ratio<u64>, MetricError> {
    if predictions.len() != golds.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if golds.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = predictions.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(Ratio::new(hits as u64, golds.len() as u64))
}

/// Four-decimal rendering of an exact ratio (round half up).
pub fn render4(value: Ratio<u64>) -> String {
    let scaled = (value * 10_000u64 + Ratio::new(1, 2)).floor().to_integer();
    format!("{}.{:04}", scaled / 10_000, scaled % 10_000)
}

pub fn ratio_to_f64(value: Ratio<u64>) -> f64 {
    *value.numer() as f64 / *value.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Per-class precision/recall/F1 in the order of `classes`. A class with no
/// gold and no predicted items scores 0.
pub fn per_class_scores<T: Eq + Hash + AsRef<str>>(
    predictions: &[T],
    golds: &[T],
    classes: &[T],
) -> Result<Vec<ClassScore>, MetricError> {
    if predictions.len() != golds.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if classes.is_empty() {
        return Err(MetricError::NoClasses);
    }
    let mut tp: HashMap<&T, usize> = HashMap::new();
    let mut fp: HashMap<&T, usize> = HashMap::new();
    let mut fn_: HashMap<&T, usize> = HashMap::new();
    for (p, g) in predictions.iter().zip(golds) {
        if p == g {
            *tp.entry(g).or_default() += 1;
        } else {
            *fp.entry(p).or_default() += 1;
            *fn_.entry(g).or_default() += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(classes
        .iter()
        .map(|c| {
            let t = tp.get(c).copied().unwrap_or(0);
            let f_p = fp.get(c).copied().unwrap_or(0);
            let f_n = fn_.get(c).copied().unwrap_or(0);
            ClassScore {
                class: c.as_ref().to_string(),
                precision: ratio(t, t + f_p),
                recall: ratio(t, t + f_n),
                f1: ratio(2 * t, 2 * t + f_p + f_n),
                support: t + f_n,
            }
        })
        .collect())
}

/// Unweighted mean of per-class F1 over `classes`.
pub fn macro_f1<T: Eq + Hash + AsRef<str>>(
    predictions: &[T],
    golds: &[T],
    classes: &[T],
) -> Result<f64, MetricError> {
    let scores = per_class_scores(predictions, golds, classes)?;
    Ok(scores.iter().map(|s| s.f1).sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let precision = if candidate_total == 0 {
            0.0
        } else {
            overlap as f64 / candidate_total as f64
        };
        let recall = if reference_total == 0 {
            0.0
        } else {
            overlap as f64 / reference_total as f64
        };
        RougeScore {
            precision,
            recall,
            f1: f_measure(precision, recall, 1.0),
        }
    }
}

/// Weighted harmonic mean; `beta = 1` gives F1.
pub fn f_measure(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

/// ROUGE-N with clipped n-gram counts.
pub fn rouge_n<S: AsRef<str>>(candidate: &[S], reference: &[S], n: usize) -> RougeScore {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap: usize = cand
        .iter()
        .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_counts(
        overlap,
        candidate.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    )
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> RougeScore {
    RougeScore::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}
