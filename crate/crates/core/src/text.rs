//! Word tokenization shared by keyword analysis, ROUGE and the baseline
//! classifier.

use std::collections::HashMap;

use unicode_segmentation::UnicodeSegmentation;

/// UAX #29 word tokenizer with an optional phrase lexicon.
///
/// Tokens are lower-cased. Lexicon entries are matched greedily (longest
/// first) over the word sequence and emitted as a single token spelled like
/// the normalized entry, so `"lift rates"` stays one keyword and a run of
/// ideographs listed in the lexicon becomes one word.
#[derive(Debug, Clone, Default)]
pub struct Tokenizer {
    phrases: HashMap<Vec<String>, String>,
    longest: usize,
}

fn words(text: &str) -> Vec<String> {
    text.unicode_words().map(str::to_lowercase).collect()
}

impl Tokenizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_lexicon<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokenizer = Tokenizer::default();
        for entry in entries {
            let parts = words(entry.as_ref());
            if parts.len() < 2 {
                continue;
            }
            let spelled = entry
                .as_ref()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
                .to_lowercase();
            tokenizer.longest = tokenizer.longest.max(parts.len());
            tokenizer.phrases.insert(parts, spelled);
        }
        tokenizer
    }

    /// Lexicon read from text: one entry per line, `#` starts a comment.
    pub fn from_lexicon_text(text: &str) -> Self {
        Self::with_lexicon(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let parts = words(text);
        if self.phrases.is_empty() {
            return parts;
        }
        let mut out = Vec::with_capacity(parts.len());
        let mut i = 0;
        'outer: while i < parts.len() {
            let max = self.longest.min(parts.len() - i);
            for len in (2..=max).rev() {
                if let Some(phrase) = self.phrases.get(&parts[i..i + len]) {
                    out.push(phrase.clone());
                    i += len;
                    continue 'outer;
                }
            }
            out.push(parts[i].clone());
            i += 1;
        }
        out
    }
}

/// Tokenizes with the default (lexicon-free) tokenizer.
pub fn tokenize(text: &str) -> Vec<String> {
    words(text)
}
