use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::{train_baseline, Classifier};
use super::cache::OpinionCache;
use super::compose::{compose_input, scoped_items, ComposeMode, ComposedInput, InputScope};
use super::generator::{generate_opinions, CueStub, EchoStub, GenerationOptions, GenerationStats, Generator};
use super::plugin::{PluginClassifier, PluginGenerator};
use super::prompt::PromptTemplate;
use super::CodError;
use crate::domain::{Instance, NewsItem, Task};
use crate::fsutil::write_atomic;
use crate::labeler::{LabeledDataset, SplitName};
use crate::metrics::{accuracy, macro_f1, per_class_scores, render4, ClassScore};
use crate::TOOL_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GeneratorSpec {
    None,
    StubEcho,
    StubCue,
    Plugin { command: String },
}

impl FromStr for GeneratorSpec {
    type Err = CodError;
    /// `none`, `stub-echo`, `stub-cue`, or a plugin command line.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "" => return Err(CodError::InvalidConfig("empty generator".into())),
            "none" => GeneratorSpec::None,
            "stub-echo" => GeneratorSpec::StubEcho,
            "stub-cue" => GeneratorSpec::StubCue,
            cmd => GeneratorSpec::Plugin { command: cmd.to_string() },
        })
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::None => f.write_str("none"),
            GeneratorSpec::StubEcho => f.write_str("stub-echo"),
            GeneratorSpec::StubCue => f.write_str("stub-cue"),
            GeneratorSpec::Plugin { command } => f.write_str(command),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClassifierSpec {
    Baseline,
    Plugin { command: String },
}

impl FromStr for ClassifierSpec {
    type Err = CodError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "" => return Err(CodError::InvalidConfig("empty classifier".into())),
            "baseline" => ClassifierSpec::Baseline,
            cmd => ClassifierSpec::Plugin { command: cmd.to_string() },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub generator: GeneratorSpec,
    /// Built-in template name or template file path.
    pub template: String,
    pub mode: ComposeMode,
    pub scope: InputScope,
    pub classifier: ClassifierSpec,
    pub seed: u64,
    pub max_len: usize,
    pub generation: GenerationOptions,
    pub request_timeout_ms: u64,
    /// `None` disables the opinion cache.
    pub cache_dir: Option<PathBuf>,
    /// Cue words per class for `stub-cue`; defaults to the synthetic lexicon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue_lexicon: Option<BTreeMap<String, Vec<String>>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Timing,
            generator: GeneratorSpec::None,
            template: "plain".into(),
            mode: ComposeMode::NewsOnly,
            scope: InputScope::Window,
            classifier: ClassifierSpec::Baseline,
            seed: 7,
            max_len: 512,
            generation: GenerationOptions::default(),
            request_timeout_ms: 30_000,
            cache_dir: Some(PathBuf::from("opinions.cache")),
            cue_lexicon: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CodError> {
        if self.generator == GeneratorSpec::None && self.mode.uses_opinions() {
            return Err(CodError::InvalidConfig(format!(
                "compose mode {} needs a generator, but generator is none",
                self.mode
            )));
        }
        if self.max_len == 0 {
            return Err(CodError::InvalidConfig("max_len must be at least 1".into()));
        }
        if self.generation.concurrency == 0 {
            return Err(CodError::InvalidConfig("concurrency must be at least 1".into()));
        }
        Ok(())
    }

    pub fn instantiate_generator(&self) -> Result<Box<dyn Generator>, CodError> {
        Ok(match &self.generator {
            GeneratorSpec::None => unreachable!("validated"),
            GeneratorSpec::StubEcho => Box::new(EchoStub),
            GeneratorSpec::StubCue => Box::new(CueStub::from_lexicon(
                self.cue_lexicon
                    .as_ref()
                    .unwrap_or(&crate::synth::default_lexicon()),
            )),
            GeneratorSpec::Plugin { command } => Box::new(PluginGenerator::spawn(
                command,
                Duration::from_millis(self.request_timeout_ms),
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub size: usize,
    pub correct: u64,
    /// Exact `correct/size` rendered to four decimals.
    pub accuracy: String,
    pub macro_f1: String,
    pub per_class: Vec<ClassScore>,
    pub predicted: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetrics {
    pub task: Task,
    pub classes: Vec<String>,
    pub train_size: usize,
    pub dev: SplitMetrics,
    pub test: SplitMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub generator: Option<String>,
    pub generation: GenerationStats,
    pub truncated_inputs: usize,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub key: String,
    pub split: SplitName,
    pub gold: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub config: serde_json::Value,
    pub metrics: ReportMetrics,
    pub runtime: RuntimeStats,
    #[serde(skip)]
    pub predictions: Vec<PredictionRecord>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn metrics_json(&self) -> String {
        serde_json::to_string(&self.metrics).expect("metrics serialize")
    }

    pub fn predictions_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.predictions {
            out.push_str(&serde_json::to_string(p).expect("prediction serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn write_report(path: &Path, report: &ExperimentReport) -> Result<(), CodError> {
    write_atomic(path, report.to_json().as_bytes()).map_err(|source| CodError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn split_metrics(predicted: &[String], golds: &[String], classes: &[String]) -> Result<SplitMetrics, CodError> {
    let mut counts: BTreeMap<String, usize> = classes.iter().map(|c| (c.clone(), 0)).collect();
    for p in predicted {
        *counts.entry(p.clone()).or_default() += 1;
    }
    if golds.is_empty() {
        return Ok(SplitMetrics {
            size: 0,
            correct: 0,
            accuracy: "n/a".into(),
            macro_f1: "n/a".into(),
            per_class: Vec::new(),
            predicted: counts,
        });
    }
    let acc = accuracy(predicted, golds)?;
    Ok(SplitMetrics {
        size: golds.len(),
        correct: predicted.iter().zip(golds).filter(|(p, g)| p == g).count() as u64,
        accuracy: render4(acc),
        macro_f1: format!("{:.4}", macro_f1(predicted, golds, classes)?),
        per_class: per_class_scores(predicted, golds, classes)?,
        predicted: counts,
    })
}

/// Trains on train, reports on dev and test.
pub fn run_experiment(dataset: &LabeledDataset, config: &ExperimentConfig) -> Result<ExperimentReport, CodError> {
    config.validate()?;
    let started = Instant::now();
    let task = config.task;
    if !dataset.splits.contains_key(&task) {
        return Err(CodError::MissingSplit {
            task: task.to_string(),
            split: "any".into(),
        });
    }
    let parts: Vec<(SplitName, Vec<&Instance>)> = [SplitName::Train, SplitName::Dev, SplitName::Test]
        .into_iter()
        .map(|s| (s, dataset.split_instances(task, s).collect()))
        .collect();

    let mut generator_name = None;
    let mut stats = GenerationStats::default();
    let opinions = if config.mode.uses_opinions() {
        let generator = config.instantiate_generator()?;
        generator_name = Some(generator.name().to_string());
        let template = PromptTemplate::resolve(&config.template)?;
        let items: Vec<&NewsItem> = parts
            .iter()
            .flat_map(|(_, v)| v.iter())
            .flat_map(|inst| scoped_items(inst, config.scope))
            .collect();
        let cache = config.cache_dir.as_ref().map(OpinionCache::new);
        let (ops, s) = generate_opinions(&items, generator.as_ref(), &template, cache.as_ref(), &config.generation)?;
        stats = s;
        ops
    } else {
        BTreeMap::new()
    };

    let compose = |v: &[&Instance]| -> Vec<(ComposedInput, String)> {
        v.par_iter()
            .map(|inst| {
                let c = compose_input(inst, config.scope, &opinions, config.mode, config.max_len);
                let gold = inst.class_name(task).expect("split members are labeled").to_string();
                (c, gold)
            })
            .collect()
    };
    let composed: Vec<(SplitName, Vec<(ComposedInput, String)>)> =
        parts.iter().map(|(s, v)| (*s, compose(v))).collect();
    let truncated_inputs = composed
        .iter()
        .flat_map(|(_, v)| v.iter())
        .filter(|(c, _)| c.truncated)
        .count();

    let classes: Vec<String> = task.classes().iter().map(|c| c.to_string()).collect();
    let classifier: Box<dyn Classifier> = match &config.classifier {
        ClassifierSpec::Baseline => {
            let train: Vec<(String, String)> = composed[0]
                .1
                .iter()
                .map(|(c, g)| (c.text.clone(), g.clone()))
                .collect();
            Box::new(train_baseline(&train)?)
        }
        ClassifierSpec::Plugin { command } => Box::new(PluginClassifier::spawn(
            command,
            classes.clone(),
            Duration::from_millis(config.request_timeout_ms),
        )?),
    };

    let mut predictions = Vec::new();
    let mut evaluated = Vec::new();
    for (split, items) in &composed[1..] {
        let labels: Vec<String> = items
            .par_iter()
            .map(|(c, _)| classifier.predict(&c.text).map(|p| p.label))
            .collect::<Result<_, _>>()?;
        let golds: Vec<String> = items.iter().map(|(_, g)| g.clone()).collect();
        evaluated.push(split_metrics(&labels, &golds, &classes)?);
        for ((c, gold), label) in items.iter().zip(labels) {
            predictions.push(PredictionRecord {
                key: c.key.clone(),
                split: *split,
                gold: gold.clone(),
                label,
            });
        }
    }
    let test = evaluated.pop().expect("test metrics");
    let dev = evaluated.pop().expect("dev metrics");

    Ok(ExperimentReport {
        tool_version: TOOL_VERSION.to_string(),
        config: serde_json::to_value(config).expect("config serializes"),
        metrics: ReportMetrics {
            task,
            classes,
            train_size: composed[0].1.len(),
            dev,
            test,
        },
        runtime: RuntimeStats {
            generator: generator_name,
            generation: stats,
            truncated_inputs,
            elapsed_ms: started.elapsed().as_millis() as u64,
        },
        predictions,
    })
}
