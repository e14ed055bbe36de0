//! Flag and config-file settings.
//!
//! Both sources share one flat key space: every flag `--foo-bar` has a file
//! key `foo-bar` (or `foo_bar`). A file may hold top-level keys and one
//! section per subcommand; the section for the running command overrides the
//! top level, and flags override both.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

fn parse_lookback(raw: &str) -> Result<u32, String> {
    raw.trim()
        .parse::<i64>()
        .ok()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| format!("must be a non-negative integer number of trading days, got {raw:?}"))
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Directory with calendar.txt and the four stream files
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Calendar file (default: <corpus>/calendar.txt)
    #[arg(long)]
    pub calendar: Option<PathBuf>,
    /// News window length in trading days before the anchor day
    #[arg(long = "T", value_name = "T", allow_hyphen_values = true, value_parser = parse_lookback)]
    #[serde(rename = "T")]
    pub lookback: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train/dev/test fractions, e.g. 0.8,0.1,0.1
    #[arg(long)]
    pub ratios: Option<String>,
    /// Price-target band treated as Keep
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Negatives drawn per positive
    #[arg(long)]
    pub negative_ratio: Option<f64>,
    /// timing | view | trading
    #[arg(long)]
    pub task: Option<String>,
    /// Class to rank keywords for (default: every class)
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// highest | lowest
    #[arg(long)]
    pub direction: Option<String>,
    /// PMI smoothing constant
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub min_df: Option<usize>,
    #[arg(long)]
    pub log_base: Option<f64>,
    /// Phrase lexicon for tokenization, one entry per line
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Pool classes for PMI: NAME=ClassA,ClassB (repeatable)
    #[arg(long)]
    pub union: Option<Vec<String>>,
    /// all | train | dev | test
    #[arg(long)]
    pub split: Option<String>,
    /// Synthetic corpus spec (JSON)
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// none | stub-echo | stub-cue | plugin command line
    #[arg(long)]
    pub generator: Option<String>,
    /// Prompt template: plain | dan | path to a template file
    #[arg(long)]
    pub prompt: Option<String>,
    /// news_only | news_then_opinion | opinion_then_news
    #[arg(long)]
    pub mode: Option<String>,
    /// window | anchor
    #[arg(long)]
    pub scope: Option<String>,
    /// baseline | plugin command line
    #[arg(long)]
    pub classifier: Option<String>,
    /// Token budget of a composed classifier input
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Generator requests in flight at once (capped by --jobs)
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Cue words per class for stub-cue (JSON object)
    #[arg(long)]
    pub cue_lexicon: Option<PathBuf>,
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Opinion cache directory (A3_CACHE_DIR overrides)
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads for all internal parallelism
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Keys each subcommand reads.
pub fn keys_for(command: &str) -> &'static [&'static str] {
    match command {
        "ingest" => &["corpus", "calendar", "out", "jobs"],
        "label" => &["corpus", "calendar", "T", "seed", "ratios", "epsilon", "negative-ratio", "out", "jobs"],
        "split" => &["dataset", "ratios", "seed", "out", "jobs"],
        "pmi" => &[
            "dataset", "task", "class", "k", "direction", "alpha", "min-df", "log-base", "lexicon", "union",
            "split", "out", "jobs",
        ],
        "synth" => &["spec", "seed", "out", "jobs"],
        "generate" => &[
            "dataset", "generator", "prompt", "scope", "retries", "timeout-ms", "concurrency", "cue-lexicon",
            "cache-dir", "out", "jobs",
        ],
        "run" => &[
            "dataset", "task", "generator", "prompt", "mode", "scope", "classifier", "max-len", "seed",
            "retries", "timeout-ms", "concurrency", "cue-lexicon", "cache-dir", "out", "jobs",
        ],
        "eval" => &["pred", "gold", "out", "jobs"],
        _ => &[],
    }
}

fn to_map(settings: &Settings) -> Map<String, Value> {
    match serde_json::to_value(settings).expect("settings serialize") {
        Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => unreachable!(),
    }
}

fn from_map(map: Map<String, Value>) -> Result<Settings, CliError> {
    serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Validation(format!("config: {e}")))
}

fn normalize_key(key: &str) -> String {
    if key == "T" {
        key.to_string()
    } else {
        key.replace('_', "-")
    }
}

/// Reads a TOML config file, keeping top-level keys and the `[command]`
/// section.
pub fn load_file(path: &Path, command: &str) -> Result<Settings, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("--config {}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("--config {}: {e}", path.display())))?;
    let mut flat = Map::new();
    let mut section = Map::new();
    for (key, value) in table {
        match value {
            toml::Value::Table(t) => {
                if !keys_for(&key).is_empty() || key == "common" {
                    if key == command {
                        for (k, v) in t {
                            section.insert(normalize_key(&k), toml_to_json(v));
                        }
                    }
                } else {
                    return Err(CliError::Validation(format!(
                        "--config {}: unknown section [{key}]",
                        path.display()
                    )));
                }
            }
            v => {
                flat.insert(normalize_key(&key), toml_to_json(v));
            }
        }
    }
    flat.extend(section);
    from_map(flat).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn toml_to_json(v: toml::Value) -> Value {
    serde_json::to_value(v).expect("toml values map to json")
}

/// Flags override the file. Flags the command does not read are rejected.
pub fn merge(command: &str, file: Settings, flags: &Settings) -> Result<Settings, CliError> {
    let allowed = keys_for(command);
    let flag_map = to_map(flags);
    if let Some(key) = flag_map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(CliError::Validation(format!("--{key} is not used by `a3 {command}`")));
    }
    let mut merged = to_map(&file);
    merged.extend(flag_map);
    from_map(merged)
}

/// The resolved settings a command ran with, restricted to its keys.
pub fn snapshot(command: &str, resolved: &Settings) -> Value {
    let allowed = keys_for(command);
    let mut map: Map<String, Value> = to_map(resolved)
        .into_iter()
        .filter(|(k, _)| allowed.contains(&k.as_str()))
        .collect();
    map.insert("command".into(), Value::from(command));
    Value::Object(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookback_rejects_negatives() {
        assert_eq!(parse_lookback("5"), Ok(5));
        assert!(parse_lookback("-1").is_err());
        assert!(parse_lookback("x").is_err());
    }

    #[test]
    fn file_sections_and_flag_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a3.toml");
        std::fs::write(&path, "seed = 1\nT = 3\n[label]\nseed = 2\nnegative_ratio = 0.5\n[run]\nseed = 9\n").unwrap();
        let file = load_file(&path, "label").unwrap();
        assert_eq!(file.seed, Some(2));
        assert_eq!(file.lookback, Some(3));
        assert_eq!(file.negative_ratio, Some(0.5));
        let flags = Settings { seed: Some(11), ..Settings::default() };
        let merged = merge("label", file, &flags).unwrap();
        assert_eq!(merged.seed, Some(11));
        assert_eq!(merged.lookback, Some(3));
    }

    #[test]
    fn unknown_keys_and_foreign_flags_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a3.toml");
        std::fs::write(&path, "sede = 1\n").unwrap();
        assert!(load_file(&path, "label").is_err());
        std::fs::write(&path, "[labell]\nseed = 1\n").unwrap();
        assert!(load_file(&path, "label").is_err());
        let flags = Settings { task: Some("view".into()), ..Settings::default() };
        let err = merge("synth", Settings::default(), &flags).unwrap_err();
        assert!(err.to_string().contains("--task"));
    }
}
