//! Candidate construction and the three labeling rules.
//!
//! Every rule looks only at events on the trading day after the anchor
//! (`t+1` in ordinal terms). Rules return a [`Decision`], which carries the
//! outcome together with the rule that fired and the event keys behind it.

mod dataset;
mod sampling;
mod split;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::domain::{
    ExclusionReason, Fixed4, Instance, LabelProvenance, Outcome, Rule, Task, TimingLabel,
    TradingLabel, ViewLabel, WindowConfig,
};

pub use dataset::{
    manifest_path, read_dataset, write_dataset, ClassCounts, DatasetManifest, LabeledDataset, SamplingSummary,
    SplitName, TaskTotals,
};
pub use sampling::{sample_negatives, NegativeSample};
pub use split::{split_dataset, SplitRatios, TaskSplit};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("no ReleaseReport instances to sample negatives against")]
    EmptyPositives,
    #[error("task {task}: class {class} has {count} instance(s); at least 3 are needed to split")]
    TooFewInstances {
        task: Task,
        class: String,
        count: usize,
    },
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("invalid negative sampling ratio {0}")]
    InvalidSamplingRatio(f64),
    #[error("dataset I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Outcome of one labeling rule with its audit trail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision<L> {
    pub outcome: Outcome<L>,
    pub rule: Rule,
    pub evidence: Vec<String>,
}

impl<L> Decision<L> {
    fn provenance(&self, instance: &Instance, task: Task) -> LabelProvenance {
        LabelProvenance {
            instance: instance.key(),
            task,
            rule: self.rule,
            evidence: self.evidence.clone(),
        }
    }
}

fn no_next_day<L>() -> Decision<L> {
    Decision {
        outcome: Outcome::Excluded(ExclusionReason::NoNextDay),
        rule: Rule::NoNextDay,
        evidence: Vec::new(),
    }
}

fn next_ordinal(instance: &Instance, corpus: &Corpus) -> Option<u32> {
    let next = instance.anchor_day.ordinal + 1;
    ((next as usize) < corpus.calendar.len()).then_some(next)
}

/// One candidate per (stock, t) with news on t. Candidates whose anchor is
/// the last calendar day come back excluded for every task.
pub fn build_instances(corpus: &Corpus, config: WindowConfig) -> Vec<Instance> {
    let last = corpus.calendar.len() as u32 - 1;
    let mut out = Vec::new();
    let mut i = 0;
    while i < corpus.news.len() {
        let anchor = &corpus.news[i];
        let mut j = i + 1;
        while j < corpus.news.len()
            && corpus.news[j].stock == anchor.stock
            && corpus.news[j].day == anchor.day
        {
            j += 1;
        }
        let t = anchor.day.ordinal;
        let window = corpus
            .news_for(&anchor.stock, t.saturating_sub(config.lookback), t)
            .to_vec();
        let mut instance = Instance::new(anchor.stock.clone(), anchor.day, window);
        if t == last {
            instance.exclude_all(ExclusionReason::NoNextDay);
            for task in Task::ALL {
                let p = no_next_day::<()>().provenance(&instance, task);
                instance.provenance.push(p);
            }
        }
        out.push(instance);
        i = j;
    }
    out
}

/// ReleaseReport iff at least one report exists for (stock, t+1).
pub fn label_timing(instance: &Instance, corpus: &Corpus) -> Decision<TimingLabel> {
    let Some(next) = next_ordinal(instance, corpus) else {
        return no_next_day();
    };
    let reports = corpus.reports_on(&instance.stock, next);
    if reports.is_empty() {
        Decision {
            outcome: Outcome::Labeled(TimingLabel::NotReleaseReport),
            rule: Rule::NoReportOnNextDay,
            evidence: Vec::new(),
        }
    } else {
        Decision {
            outcome: Outcome::Labeled(TimingLabel::ReleaseReport),
            rule: Rule::ReportOnNextDay,
            evidence: reports.iter().map(|r| r.key()).collect(),
        }
    }
}

/// Day-over-day move of the averaged price target, t to t+1.
///
/// `epsilon` is the half-width of the Keep band (inclusive).
pub fn label_view_change(instance: &Instance, corpus: &Corpus, epsilon: Fixed4) -> Decision<ViewLabel> {
    let Some(next) = next_ordinal(instance, corpus) else {
        return no_next_day();
    };
    let current = corpus.price_target_on(&instance.stock, instance.anchor_day.ordinal);
    let upcoming = corpus.price_target_on(&instance.stock, next);
    let (Some(current), Some(upcoming)) = (current, upcoming) else {
        return Decision {
            outcome: Outcome::Excluded(ExclusionReason::MissingPt),
            rule: Rule::PriceTargetMissing,
            evidence: current.into_iter().chain(upcoming).map(|p| p.key()).collect(),
        };
    };
    let delta = i128::from(upcoming.avg_price_target.raw()) - i128::from(current.avg_price_target.raw());
    let band = i128::from(epsilon.raw());
    let (label, rule) = if delta > band {
        (ViewLabel::Upgrade, Rule::PriceTargetUp)
    } else if -delta > band {
        (ViewLabel::Downgrade, Rule::PriceTargetDown)
    } else {
        (ViewLabel::Keep, Rule::PriceTargetFlat)
    };
    Decision {
        outcome: Outcome::Labeled(label),
        rule,
        evidence: vec![current.key(), upcoming.key()],
    }
}

/// Net institutional flow on t+1.
pub fn label_trading(instance: &Instance, corpus: &Corpus) -> Decision<TradingLabel> {
    let Some(next) = next_ordinal(instance, corpus) else {
        return no_next_day();
    };
    let trades = corpus.trades_on(&instance.stock, next);
    if trades.is_empty() {
        return Decision {
            outcome: Outcome::Labeled(TradingLabel::NoAction),
            rule: Rule::NoTrades,
            evidence: Vec::new(),
        };
    }
    let buys: i128 = trades.iter().map(|t| i128::from(t.buy_amount.raw())).sum();
    let sells: i128 = trades.iter().map(|t| i128::from(t.sell_amount.raw())).sum();
    let evidence = trades.iter().map(|t| t.key()).collect();
    let (outcome, rule) = match buys.cmp(&sells) {
        std::cmp::Ordering::Greater => (Outcome::Labeled(TradingLabel::Overweight), Rule::NetBuying),
        std::cmp::Ordering::Less => (Outcome::Labeled(TradingLabel::Underweight), Rule::NetSelling),
        std::cmp::Ordering::Equal => (Outcome::Excluded(ExclusionReason::Tie), Rule::BuySellTie),
    };
    Decision {
        outcome,
        rule,
        evidence,
    }
}

fn drop_provenance(instance: &mut Instance, task: Task) {
    instance.provenance.retain(|p| p.task != task);
}

pub fn apply_timing(instance: &mut Instance, corpus: &Corpus) {
    let d = label_timing(instance, corpus);
    drop_provenance(instance, Task::Timing);
    instance.provenance.push(d.provenance(instance, Task::Timing));
    instance.set_timing(d.outcome);
}

pub fn apply_view(instance: &mut Instance, corpus: &Corpus, epsilon: Fixed4) {
    let d = label_view_change(instance, corpus, epsilon);
    drop_provenance(instance, Task::View);
    instance.provenance.push(d.provenance(instance, Task::View));
    instance.set_view(d.outcome);
}

pub fn apply_trading(instance: &mut Instance, corpus: &Corpus) {
    let d = label_trading(instance, corpus);
    drop_provenance(instance, Task::Trading);
    instance.provenance.push(d.provenance(instance, Task::Trading));
    instance.set_trading(d.outcome);
}

/// Applies all three rules to every instance, in parallel on the current
/// rayon pool. Provenance is kept in task order.
pub fn label_all(instances: &mut [Instance], corpus: &Corpus, epsilon: Fixed4) {
    instances.par_iter_mut().for_each(|inst| {
        apply_timing(inst, corpus);
        apply_view(inst, corpus, epsilon);
        apply_trading(inst, corpus);
        inst.provenance.sort_by_key(|p| p.task);
    });
}

/// Settings for the end-to-end labeling pass.
#[derive(Debug, Clone)]
pub struct LabelingConfig {
    pub window: WindowConfig,
    pub epsilon: Fixed4,
    pub negative_ratio: f64,
    pub ratios: SplitRatios,
    pub seed: u64,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig {
            window: WindowConfig::default(),
            epsilon: Fixed4::ZERO,
            negative_ratio: 1.0,
            ratios: SplitRatios::default(),
            seed: 7,
        }
    }
}

/// Candidates, timing labels, balanced negatives, view and trading labels on
/// the balanced set, then one stratified split per task.
pub fn build_dataset(
    corpus: &Corpus,
    config: &LabelingConfig,
    config_snapshot: serde_json::Value,
) -> Result<LabeledDataset, LabelError> {
    let mut candidates = build_instances(corpus, config.window);
    let candidate_count = candidates.len();
    candidates.par_iter_mut().for_each(|inst| {
        if !inst.is_excluded(Task::Timing) {
            apply_timing(inst, corpus);
        }
    });

    let (positives, rest): (Vec<Instance>, Vec<Instance>) = candidates
        .into_iter()
        .filter(|i| !i.is_excluded(Task::Timing))
        .partition(|i| i.timing_label == Some(TimingLabel::ReleaseReport));
    let sample = sample_negatives(&positives, &rest, config.negative_ratio, config.seed)?;
    if let Some(w) = &sample.warning {
        log::warn!("{w}");
    }
    let sampling = SamplingSummary {
        positives: positives.len(),
        eligible_negatives: sample.eligible,
        requested_negatives: sample.requested,
        negatives: sample.selected.len(),
        warning: sample.warning.clone(),
    };

    let mut instances: Vec<Instance> = positives;
    let mut rest: Vec<Option<Instance>> = rest.into_iter().map(Some).collect();
    instances.extend(sample.selected.iter().map(|&i| rest[i].take().expect("unique index")));
    instances.sort_by(|a, b| (&a.stock, a.anchor_day.ordinal).cmp(&(&b.stock, b.anchor_day.ordinal)));

    instances.par_iter_mut().for_each(|inst| {
        apply_view(inst, corpus, config.epsilon);
        apply_trading(inst, corpus);
        inst.provenance.sort_by_key(|p| p.task);
    });

    let mut dataset = LabeledDataset {
        instances,
        splits: Default::default(),
        seed: config.seed,
        config: config_snapshot,
        candidates: candidate_count,
        sampling: Some(sampling),
    };
    for task in Task::ALL {
        let split = split_dataset(&dataset.instances, &config.ratios, config.seed, task)?;
        dataset.splits.insert(task, split);
    }
    Ok(dataset)
}
