use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::CodError;
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    /// Class name to score; for the baseline these are posteriors.
    pub scores: BTreeMap<String, f64>,
}

impl Prediction {
    /// Argmax; exact ties go to the first class name in sorted order.
    pub fn from_scores(scores: BTreeMap<String, f64>) -> Self {
        let mut best: Option<(&String, f64)> = None;
        for (class, &s) in &scores {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((class, s));
            }
        }
        let label = best.map(|(c, _)| c.clone()).unwrap_or_default();
        Prediction { label, scores }
    }
}

pub trait Classifier: Send + Sync {
    fn predict(&self, text: &str) -> Result<Prediction, CodError>;
}

/// Multinomial naive Bayes over unigram counts with add-one smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub classes: Vec<String>,
    pub log_priors: Vec<f64>,
    pub vocabulary: BTreeMap<String, usize>,
    /// `log_likelihoods[class][term]`.
    pub log_likelihoods: Vec<Vec<f64>>,
}

pub fn train_baseline(examples: &[(String, String)]) -> Result<BaselineModel, CodError> {
    let classes: Vec<String> = examples
        .iter()
        .map(|(_, c)| c.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(CodError::SingleClass(classes));
    }
    let docs: Vec<(Vec<String>, usize)> = examples
        .iter()
        .map(|(text, c)| (tokenize(text), classes.binary_search(c).expect("known class")))
        .collect();
    let vocabulary: BTreeMap<String, usize> = docs
        .iter()
        .flat_map(|(toks, _)| toks.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();

    let v = vocabulary.len();
    let mut counts = vec![vec![0u64; v]; classes.len()];
    let mut doc_counts = vec![0u64; classes.len()];
    for (toks, c) in &docs {
        doc_counts[*c] += 1;
        for t in toks {
            counts[*c][vocabulary[t]] += 1;
        }
    }
    let n = docs.len() as f64;
    let log_priors = doc_counts.iter().map(|&d| (d as f64 / n).ln()).collect();
    let log_likelihoods = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            let denom = (total + v as u64) as f64;
            row.iter().map(|&k| ((k + 1) as f64 / denom).ln()).collect()
        })
        .collect();
    Ok(BaselineModel {
        classes,
        log_priors,
        vocabulary,
        log_likelihoods,
    })
}

impl BaselineModel {
    /// Joint log-probabilities per class; unseen tokens are ignored.
    pub fn log_joint(&self, text: &str) -> Vec<f64> {
        let ids: Vec<usize> = tokenize(text)
            .iter()
            .filter_map(|t| self.vocabulary.get(t).copied())
            .collect();
        self.classes
            .iter()
            .enumerate()
            .map(|(c, _)| self.log_priors[c] + ids.iter().map(|&i| self.log_likelihoods[c][i]).sum::<f64>())
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("model serializes")
    }
}

impl Classifier for BaselineModel {
    fn predict(&self, text: &str) -> Result<Prediction, CodError> {
        let joint = self.log_joint(text);
        let max = joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = joint.iter().map(|j| (j - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let scores = self
            .classes
            .iter()
            .zip(&exps)
            .map(|(c, e)| (c.clone(), e / z))
            .collect();
        Ok(Prediction::from_scores(scores))
    }
}
