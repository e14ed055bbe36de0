//! `dataset.jsonl` / `manifest.json` reading and writing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LabelError, TaskSplit};
use crate::domain::{Instance, Task};
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Dev, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingSummary {
    pub positives: usize,
    pub eligible_negatives: usize,
    pub requested_negatives: usize,
    pub negatives: usize,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub instances: Vec<Instance>,
    pub splits: BTreeMap<Task, TaskSplit>,
    pub seed: u64,
    /// Resolved run configuration, embedded verbatim in the manifest.
    pub config: serde_json::Value,
    /// Candidates before negative sampling.
    pub candidates: usize,
    pub sampling: Option<SamplingSummary>,
}

/// class -> count, per split.
pub type ClassCounts = BTreeMap<SplitName, BTreeMap<String, usize>>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTotals {
    pub labeled: usize,
    pub excluded: usize,
    pub exclusions: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub instances: usize,
    pub candidates: usize,
    pub sampling: Option<SamplingSummary>,
    pub counts: BTreeMap<Task, ClassCounts>,
    pub totals: BTreeMap<Task, TaskTotals>,
}

#[derive(Serialize, Deserialize)]
struct DatasetLine {
    #[serde(flatten)]
    instance: Instance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trading_label_alias: Option<String>,
    #[serde(default)]
    split: BTreeMap<Task, SplitName>,
}

impl LabeledDataset {
    pub fn split_indices(&self, task: Task, name: SplitName) -> &[usize] {
        self.splits.get(&task).map(|s| s.get(name)).unwrap_or(&[])
    }

    pub fn split_instances(&self, task: Task, name: SplitName) -> impl Iterator<Item = &Instance> {
        self.split_indices(task, name)
            .iter()
            .map(move |&i| &self.instances[i])
    }

    pub fn totals(&self, task: Task) -> TaskTotals {
        let mut totals = TaskTotals::default();
        for inst in &self.instances {
            if let Some(reason) = inst.exclusions.get(&task) {
                totals.excluded += 1;
                *totals.exclusions.entry(reason.code().to_string()).or_default() += 1;
            } else if inst.class_name(task).is_some() {
                totals.labeled += 1;
            }
        }
        totals
    }

    pub fn class_counts(&self, task: Task) -> ClassCounts {
        let mut counts = ClassCounts::new();
        for name in SplitName::ALL {
            let per_class = counts.entry(name).or_default();
            for class in task.classes() {
                per_class.insert(class.to_string(), 0);
            }
            for inst in self.split_instances(task, name) {
                if let Some(class) = inst.class_name(task) {
                    *per_class.entry(class.to_string()).or_default() += 1;
                }
            }
        }
        counts
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            tool_version: crate::TOOL_VERSION.to_string(),
            seed: self.seed,
            config: self.config.clone(),
            instances: self.instances.len(),
            candidates: self.candidates,
            sampling: self.sampling.clone(),
            counts: self
                .splits
                .keys()
                .map(|&t| (t, self.class_counts(t)))
                .collect(),
            totals: Task::ALL.iter().map(|&t| (t, self.totals(t))).collect(),
        }
    }

    /// JSON Lines rendering, one instance per line with its split tags.
    pub fn to_jsonl(&self) -> String {
        let assignments: BTreeMap<Task, BTreeMap<usize, SplitName>> = self
            .splits
            .iter()
            .map(|(t, s)| (*t, s.assignment()))
            .collect();
        let mut out = String::new();
        for (i, inst) in self.instances.iter().enumerate() {
            let split = assignments
                .iter()
                .filter_map(|(t, a)| a.get(&i).map(|s| (*t, *s)))
                .collect();
            let line = DatasetLine {
                instance: inst.clone(),
                trading_label_alias: inst.trading_label.map(|l| l.alias().to_string()),
                split,
            };
            out.push_str(&serde_json::to_string(&line).expect("instance serializes"));
            out.push('\n');
        }
        out
    }
}

/// `manifest.json` beside `dataset.jsonl`; `<stem>.manifest.json` beside any
/// other name, so several datasets can share a directory.
pub fn manifest_path(dataset_path: &Path) -> PathBuf {
    let name = match dataset_path.file_stem().and_then(|s| s.to_str()) {
        Some(stem) if stem != "dataset" => format!("{stem}.manifest.json"),
        _ => "manifest.json".to_string(),
    };
    dataset_path.with_file_name(name)
}

#[cfg(test)]
#[test]
fn manifest_names() {
    assert_eq!(manifest_path(Path::new("out/dataset.jsonl")), Path::new("out/manifest.json"));
    assert_eq!(manifest_path(Path::new("out/v2.jsonl")), Path::new("out/v2.manifest.json"));
    assert_eq!(manifest_path(Path::new("dataset.jsonl")), Path::new("manifest.json"));
}

/// Writes the dataset and its manifest, each atomically.
pub fn write_dataset(path: impl AsRef<Path>, dataset: &LabeledDataset) -> Result<(), LabelError> {
    let path = path.as_ref();
    write_atomic(path, dataset.to_jsonl().as_bytes())?;
    let manifest = serde_json::to_string_pretty(&dataset.manifest()).expect("manifest serializes");
    write_atomic(&manifest_path(path), (manifest + "\n").as_bytes())?;
    Ok(())
}

/// Reads a dataset back. Split membership comes from the per-line tags; seed
/// and config come from the sibling manifest when present.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset, LabelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut instances = Vec::new();
    let mut splits: BTreeMap<Task, TaskSplit> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DatasetLine = serde_json::from_str(line).map_err(|e| LabelError::Format {
            line: n + 1,
            message: e.to_string(),
        })?;
        let index = instances.len();
        for (task, name) in parsed.split {
            let split = splits.entry(task).or_default();
            match name {
                SplitName::Train => split.train.push(index),
                SplitName::Dev => split.dev.push(index),
                SplitName::Test => split.test.push(index),
            }
        }
        instances.push(parsed.instance);
    }
    let manifest: Option<DatasetManifest> = fs::read_to_string(manifest_path(path))
        .ok()
        .and_then(|m| serde_json::from_str(&m).ok());
    let (seed, config, candidates, sampling) = match manifest {
        Some(m) => (m.seed, m.config, m.candidates, m.sampling),
        None => (0, serde_json::Value::Null, instances.len(), None),
    };
    Ok(LabeledDataset {
        instances,
        splits,
        seed,
        config,
        candidates,
        sampling,
    })
}
