//! Class-conditional pointwise mutual information over instance windows.
//!
//! Counting is by document presence: `df(w)` is the number of instances
//! whose window text contains `w` at least once, and `df_c(w)` the same
//! restricted to class `c`. With smoothing `α`,
//!
//! ```text
//! P(w)   = (df(w)   + α) / (N   + 2α)
//! P(w|c) = (df_c(w) + α) / (N_c + 2α)
//! score  = log_b(P(w|c) / P(w))
//! ```
//!
//! The ratio is formed as an exact reduced fraction before taking the log,
//! so terms with equal true scores get bit-identical floats.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Fixed4, Instance};
use crate::text::Tokenizer;

#[derive(Debug, Error, PartialEq)]
pub enum PmiError {
    #[error("need at least two non-empty classes; empty or missing: {0:?}")]
    DegenerateClasses(Vec<String>),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("invalid PMI setting: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmiConfig {
    pub min_df: usize,
    pub smoothing: Fixed4,
    pub log_base: f64,
}

impl Default for PmiConfig {
    fn default() -> Self {
        PmiConfig {
            min_df: 1,
            smoothing: Fixed4::from_raw(5_000),
            log_base: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Highest,
    Lowest,
}

impl FromStr for Direction {
    type Err = PmiError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "highest" => Ok(Direction::Highest),
            "lowest" => Ok(Direction::Lowest),
            _ => Err(PmiError::InvalidConfig(format!(
                "direction {s:?} (expected highest or lowest)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Keyword {
    pub term: String,
    pub score: f64,
    pub doc_freq: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmiTable {
    pub vocabulary: Vec<String>,
    pub classes: Vec<String>,
    /// `scores[term][class]`.
    pub scores: Vec<Vec<f64>>,
    pub doc_freq: Vec<usize>,
    pub class_doc_freq: Vec<Vec<usize>>,
    pub class_sizes: Vec<usize>,
    pub total_docs: usize,
    pub config: PmiConfig,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `log_b` of `(df_c+α)(N+2α) / ((df+α)(N_c+2α))` with α = `alpha_raw`/10⁴.
fn score(df_c: usize, df: usize, n_c: usize, n: usize, alpha_raw: u128, base: f64) -> f64 {
    const SCALE: u128 = 10_000;
    let num = (SCALE * df_c as u128 + alpha_raw) * (SCALE * n as u128 + 2 * alpha_raw);
    let den = (SCALE * df as u128 + alpha_raw) * (SCALE * n_c as u128 + 2 * alpha_raw);
    if num == 0 {
        return f64::NEG_INFINITY;
    }
    let g = gcd(num, den);
    let ratio = (num / g) as f64 / (den / g) as f64;
    if base == 2.0 {
        ratio.log2()
    } else {
        ratio.ln() / base.ln()
    }
}

type Counts = HashMap<String, Vec<usize>>;

fn merge(mut a: Counts, b: Counts) -> Counts {
    for (term, counts) in b {
        match a.get_mut(&term) {
            Some(existing) => existing.iter_mut().zip(&counts).for_each(|(x, y)| *x += y),
            None => {
                a.insert(term, counts);
            }
        }
    }
    a
}

/// Builds the table from documents given as term sets with a class name.
///
/// `declared` lists classes that must be present; classes seen in the
/// documents are added to it. Classes are kept in sorted order.
pub fn compute_pmi_from_docs(
    docs: &[(BTreeSet<String>, String)],
    declared: &[String],
    config: &PmiConfig,
) -> Result<PmiTable, PmiError> {
    if config.min_df == 0 {
        return Err(PmiError::InvalidConfig("min_df must be at least 1".into()));
    }
    if config.smoothing.is_negative() {
        return Err(PmiError::InvalidConfig("smoothing must be non-negative".into()));
    }
    if !(config.log_base > 0.0 && config.log_base != 1.0 && config.log_base.is_finite()) {
        return Err(PmiError::InvalidConfig(format!("log base {}", config.log_base)));
    }
    let classes: Vec<String> = declared
        .iter()
        .cloned()
        .chain(docs.iter().map(|(_, c)| c.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_index: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut class_sizes = vec![0usize; classes.len()];
    for (_, c) in docs {
        class_sizes[class_index[c.as_str()]] += 1;
    }
    let empty: Vec<String> = classes
        .iter()
        .zip(&class_sizes)
        .filter(|(_, &n)| n == 0)
        .map(|(c, _)| c.clone())
        .collect();
    if classes.len() < 2 || !empty.is_empty() {
        return Err(PmiError::DegenerateClasses(if empty.is_empty() {
            classes
        } else {
            empty
        }));
    }

    let k = classes.len();
    let counts: Counts = docs
        .par_iter()
        .fold(Counts::new, |mut acc, (terms, class)| {
            let ci = class_index[class.as_str()];
            for term in terms {
                acc.entry(term.clone()).or_insert_with(|| vec![0; k])[ci] += 1;
            }
            acc
        })
        .reduce(Counts::new, merge);

    let mut rows: Vec<(String, Vec<usize>)> = counts
        .into_iter()
        .filter(|(_, per_class)| per_class.iter().sum::<usize>() >= config.min_df)
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));

    let n = docs.len();
    let alpha = config.smoothing.raw() as u128;
    let mut table = PmiTable {
        vocabulary: Vec::with_capacity(rows.len()),
        classes,
        scores: Vec::with_capacity(rows.len()),
        doc_freq: Vec::with_capacity(rows.len()),
        class_doc_freq: Vec::with_capacity(rows.len()),
        class_sizes,
        total_docs: n,
        config: config.clone(),
    };
    for (term, per_class) in rows {
        let df: usize = per_class.iter().sum();
        let scores = per_class
            .iter()
            .zip(&table.class_sizes)
            .map(|(&dfc, &nc)| score(dfc, df, nc, n, alpha, config.log_base))
            .collect();
        table.vocabulary.push(term);
        table.scores.push(scores);
        table.doc_freq.push(df);
        table.class_doc_freq.push(per_class);
    }
    Ok(table)
}

/// Term set of an instance's window (headline and body of every item).
pub fn window_terms(instance: &Instance, tokenizer: &Tokenizer) -> BTreeSet<String> {
    let mut terms = BTreeSet::new();
    for item in &instance.window {
        terms.extend(tokenizer.tokenize(&item.headline));
        terms.extend(tokenizer.tokenize(&item.body));
    }
    terms
}

/// PMI over instances; `class_of` maps an instance to its class (or `None`
/// to leave it out). Mapping several labels to one name pools them.
pub fn compute_pmi<F>(
    instances: &[Instance],
    class_of: F,
    declared: &[String],
    tokenizer: &Tokenizer,
    config: &PmiConfig,
) -> Result<PmiTable, PmiError>
where
    F: Fn(&Instance) -> Option<String> + Sync,
{
    let docs: Vec<(BTreeSet<String>, String)> = instances
        .par_iter()
        .filter_map(|inst| class_of(inst).map(|c| (window_terms(inst, tokenizer), c)))
        .collect();
    compute_pmi_from_docs(&docs, declared, config)
}

impl PmiTable {
    pub fn class_position(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn score(&self, term: &str, class: &str) -> Option<f64> {
        let t = self.vocabulary.binary_search_by(|v| v.as_str().cmp(term)).ok()?;
        let c = self.class_position(class)?;
        Some(self.scores[t][c])
    }

    /// Top (or bottom) `k` terms for `class`. Ties go to the higher document
    /// frequency, then to the lexicographically smaller term.
    pub fn top_keywords(&self, class: &str, k: usize, direction: Direction) -> Result<Vec<Keyword>, PmiError> {
        let c = self
            .class_position(class)
            .ok_or_else(|| PmiError::UnknownClass(class.to_string()))?;
        let mut order: Vec<usize> = (0..self.vocabulary.len()).collect();
        order.sort_by(|&a, &b| {
            let by_score = self.scores[a][c].total_cmp(&self.scores[b][c]);
            let by_score = match direction {
                Direction::Highest => by_score.reverse(),
                Direction::Lowest => by_score,
            };
            by_score
                .then(self.doc_freq[b].cmp(&self.doc_freq[a]))
                .then(self.vocabulary[a].cmp(&self.vocabulary[b]))
        });
        Ok(order
            .into_iter()
            .take(k)
            .map(|i| Keyword {
                term: self.vocabulary[i].clone(),
                score: self.scores[i][c],
                doc_freq: self.doc_freq[i],
            })
            .collect())
    }

    /// `term,class,score,doc_freq` rows, scores to three decimals.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["term", "class", "score", "doc_freq"])
            .expect("in-memory write");
        for (t, term) in self.vocabulary.iter().enumerate() {
            for (c, class) in self.classes.iter().enumerate() {
                writer
                    .write_record([
                        term.as_str(),
                        class.as_str(),
                        &format_score(self.scores[t][c]),
                        &self.doc_freq[t].to_string(),
                    ])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8 input")
    }
}

pub fn format_score(score: f64) -> String {
    if score == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if score == f64::INFINITY {
        "inf".to_string()
    } else {
        // avoid "-0.000"
        let s = format!("{score:.3}");
        if s == "-0.000" {
            "0.000".to_string()
        } else {
            s
        }
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.term, format_score(self.score), self.doc_freq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &[&str], class: &str) -> (BTreeSet<String>, String) {
        (words.iter().map(|w| w.to_string()).collect(), class.to_string())
    }

    fn hand_corpus() -> Vec<(BTreeSet<String>, String)> {
        vec![
            doc(&["tariff", "market"], "Release"),
            doc(&["tariff", "market"], "Release"),
            doc(&["market", "calm"], "NotRelease"),
            doc(&["market"], "NotRelease"),
        ]
    }

    fn cfg(alpha: &str) -> PmiConfig {
        PmiConfig {
            smoothing: alpha.parse().unwrap(),
            ..PmiConfig::default()
        }
    }

    #[test]
    fn hand_corpus_scores() {
        let table = compute_pmi_from_docs(&hand_corpus(), &[], &cfg("0")).unwrap();
        // P(tariff|Release) = 2/2, P(tariff) = 2/4
        assert_eq!(table.score("tariff", "Release"), Some(1.0));
        assert_eq!(table.score("tariff", "NotRelease"), Some(f64::NEG_INFINITY));
        assert_eq!(table.score("market", "Release"), Some(0.0));
        assert_eq!(table.score("market", "NotRelease"), Some(0.0));

        let smoothed = compute_pmi_from_docs(&hand_corpus(), &[], &cfg("0.5")).unwrap();
        // (0.5/3) / (2.5/5) = 1/3
        let s = smoothed.score("tariff", "NotRelease").unwrap();
        assert!((s - (1.0f64 / 3.0).log2()).abs() < 1e-12);
        assert!(s.is_finite() && s < 0.0);
    }

    #[test]
    fn min_df_filters_vocabulary() {
        let table = compute_pmi_from_docs(
            &hand_corpus(),
            &[],
            &PmiConfig {
                min_df: 2,
                ..cfg("0")
            },
        )
        .unwrap();
        assert_eq!(table.vocabulary, ["market", "tariff"]);
    }

    #[test]
    fn degenerate_classes_rejected() {
        let one = vec![doc(&["a"], "X"), doc(&["b"], "X")];
        assert!(matches!(
            compute_pmi_from_docs(&one, &[], &PmiConfig::default()),
            Err(PmiError::DegenerateClasses(_))
        ));
        let declared = vec!["Y".to_string()];
        assert_eq!(
            compute_pmi_from_docs(&hand_corpus(), &declared, &PmiConfig::default()),
            Err(PmiError::DegenerateClasses(vec!["Y".into()]))
        );
    }

    #[test]
    fn top_keywords_ordering() {
        let table = compute_pmi_from_docs(&hand_corpus(), &[], &cfg("0.5")).unwrap();
        let top = table.top_keywords("Release", 10, Direction::Highest).unwrap();
        assert_eq!(top[0].term, "tariff");
        assert_eq!(top.len(), 3);
        let low = table.top_keywords("Release", 1, Direction::Lowest).unwrap();
        assert_eq!(low[0].term, "calm");
        assert_eq!(
            table.top_keywords("Nope", 1, Direction::Highest),
            Err(PmiError::UnknownClass("Nope".into()))
        );
    }

    #[test]
    fn csv_has_three_decimals() {
        let table = compute_pmi_from_docs(&hand_corpus(), &[], &cfg("0")).unwrap();
        let csv = table.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "term,class,score,doc_freq");
        assert!(lines.contains(&"tariff,Release,1.000,2"));
        assert!(lines.contains(&"tariff,NotRelease,-inf,2"));
        assert!(lines.contains(&"market,NotRelease,0.000,4"));
    }
}
