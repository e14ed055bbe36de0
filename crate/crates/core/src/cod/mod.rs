//! Opinion-in-the-loop classification.
//!
//! Stage one asks a generator for an opinion on every news item in the
//! instance windows; stage two classifies the news text composed with those
//! opinions. Generators and classifiers are either in-process stubs and a
//! naive-Bayes baseline, or external plugin processes speaking newline-
//! delimited JSON (see [`plugin`]).

pub mod baseline;
pub mod cache;
pub mod compose;
pub mod experiment;
pub mod generator;
pub mod plugin;
pub mod prompt;

use thiserror::Error;

pub use baseline::{train_baseline, BaselineModel, Classifier, Prediction};
pub use cache::OpinionCache;
pub use compose::{compose_input, ComposeMode, ComposedInput, InputScope, SEPARATOR};
pub use experiment::{run_experiment, ClassifierSpec, ExperimentConfig, ExperimentReport, GeneratorSpec};
pub use generator::{generate_opinions, GenerationOptions, GenerationStats, Generator, Opinion};
pub use prompt::PromptTemplate;

#[derive(Debug, Error)]
pub enum CodError {
    #[error("template placeholder {{{0}}} is not one of {{headline}}, {{body}}")]
    UnboundPlaceholder(String),
    #[error("prompt template: {0}")]
    Template(String),
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("generator stopped responding after {completed} opinions ({remaining} left); rerun to resume from the cache")]
    GeneratorLost { completed: usize, remaining: usize },
    #[error("plugin protocol error: {0}")]
    PluginProtocol(String),
    #[error("baseline needs at least two classes in training data, found {0:?}")]
    SingleClass(Vec<String>),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("dataset has no {split} split for task {task}")]
    MissingSplit { task: String, split: String },
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}
