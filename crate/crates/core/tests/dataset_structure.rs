use std::fs;
use std::path::Path;

use a3_core::corpus::load_corpus;
use a3_core::domain::Task;
use a3_core::labeler::{build_dataset, LabeledDataset, LabelingConfig, SplitName};
use a3_core::synth::{generate_stream, SynthSpec};

fn labeled(dir: &Path) -> LabeledDataset {
    let (corpus, _) = load_corpus(dir, None).unwrap();
    build_dataset(&corpus, &LabelingConfig::default(), serde_json::json!({})).unwrap()
}

fn synth_into(dir: &Path, spec: &SynthSpec) {
    generate_stream(spec).unwrap().write_to(dir).unwrap();
}

#[test]
fn timing_is_balanced_and_splits_are_exact() {
    for seed in [7, 11, 23] {
        let dir = tempfile::tempdir().unwrap();
        synth_into(dir.path(), &SynthSpec { seed, ..SynthSpec::default() });
        let ds = labeled(dir.path());
        let ratios = LabelingConfig::default().ratios.parts();
        let sampling = ds.sampling.as_ref().unwrap();
        assert!(sampling.warning.is_none() && sampling.negatives == sampling.positives, "seed {seed}: {sampling:?}");

        let timing = ds.class_counts(Task::Timing);
        for name in SplitName::ALL {
            let c = &timing[&name];
            assert_eq!(c["ReleaseReport"], c["NotReleaseReport"], "seed {seed} {name:?}");
        }
        for task in Task::ALL {
            let counts = ds.class_counts(task);
            for class in task.classes() {
                let total = ds
                    .instances
                    .iter()
                    .filter(|i| !i.is_excluded(task) && i.class_name(task) == Some(*class))
                    .count() as u64;
                let mut assigned = 0;
                for (name, ratio) in SplitName::ALL.iter().zip(ratios) {
                    let n = counts[name][*class] as u64;
                    assigned += n;
                    // |n - ratio * total| < 1, in exact integer arithmetic.
                    let lhs = n * ratio.denom();
                    let rhs = total * ratio.numer();
                    assert!(lhs.abs_diff(rhs) < *ratio.denom(), "seed {seed} {task} {class} {name:?}: {n} of {total}");
                }
                assert_eq!(assigned, total, "seed {seed} {task} {class}");
            }
        }
    }
}

fn assert_accounting(ds: &LabeledDataset) -> [usize; 3] {
    let mut excluded = [0; 3];
    for (k, task) in Task::ALL.iter().enumerate() {
        let t = ds.totals(*task);
        assert_eq!(t.labeled + t.excluded, ds.instances.len(), "{task}");
        assert_eq!(t.exclusions.values().sum::<usize>(), t.excluded, "{task}");
        excluded[k] = t.excluded;
    }
    excluded
}

#[test]
fn labeled_plus_excluded_is_shared_across_tasks() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), &SynthSpec::default());
    let before = assert_accounting(&labeled(dir.path()));
    assert!(before[1] > 0 && before[2] > 0, "{before:?}");
    assert_ne!(before[1], before[2]);

    // Knock out every fifth price target; view exclusions grow, totals stay shared.
    let path = dir.path().join("price_targets.jsonl");
    let kept: String = fs::read_to_string(&path)
        .unwrap()
        .lines()
        .enumerate()
        .filter(|(i, _)| i % 5 != 4)
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    fs::write(&path, kept).unwrap();
    let after = assert_accounting(&labeled(dir.path()));
    assert!(after[1] > before[1], "{before:?} -> {after:?}");
}

/// `observed` successes out of independent Bernoulli trials with success
/// probabilities `ps` fall within three standard deviations of the mean.
fn within_three_sigma(what: &str, observed: usize, ps: &[f64]) {
    let mean: f64 = ps.iter().sum();
    let sd = ps.iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt();
    let z = (observed as f64 - mean) / sd;
    assert!(z.abs() <= 3.0, "{what}: observed {observed}, expected {mean:.1} (z = {z:.2})");
}

#[test]
fn synthetic_class_frequencies_match_the_spec() {
    let spec = SynthSpec { n_stocks: 120, n_days: 250, seed: 99, ..SynthSpec::default() };
    let corpus = generate_stream(&spec).unwrap();
    let truth: Vec<_> = corpus
        .ground_truth
        .iter()
        .filter(|g| (g.anchor_day.ordinal as usize) < spec.n_days - 1)
        .collect();
    assert!(truth.len() >= 10_000, "{} candidates", truth.len());
    let count = |f: &dyn Fn(&a3_core::synth::GroundTruth) -> bool| truth.iter().filter(|g| f(g)).count();
    let n = truth.len();

    within_three_sigma(
        "ReleaseReport",
        count(&|g| g.timing_label.map(|l| l.as_str()) == Some("ReleaseReport")),
        &vec![spec.report_prob; n],
    );

    // A missing target on day t-1 leaves day t without a base.
    let known = |g: &&a3_core::synth::GroundTruth| if g.anchor_day.ordinal == 0 { 1.0 } else { 1.0 - spec.view.missing };
    for (class, p) in [("Upgrade", spec.view.upgrade), ("Downgrade", spec.view.downgrade), ("Keep", spec.view.keep)] {
        let ps: Vec<f64> = truth.iter().map(|g| p * known(g)).collect();
        within_three_sigma(class, count(&|g| g.view_label.map(|l| l.as_str()) == Some(class)), &ps);
    }

    for (class, p) in [
        ("Overweight", spec.trading.overweight),
        ("Underweight", spec.trading.underweight),
        ("NoAction", spec.trading.no_action),
    ] {
        within_three_sigma(class, count(&|g| g.trading_label.map(|l| l.as_str()) == Some(class)), &vec![p; n]);
    }
    within_three_sigma("tie", count(&|g| g.exclusions.contains_key(&Task::Trading)), &vec![spec.trading.tie; n]);
}
