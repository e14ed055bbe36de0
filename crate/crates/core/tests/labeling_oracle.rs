mod support;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use a3_core::corpus::{load_corpus, Corpus};
use a3_core::domain::{Fixed4, Instance, Task, WindowConfig};
use a3_core::labeler::{build_instances, label_all};
use a3_core::synth::{generate_stream, SynthSpec};
use proptest::prelude::*;
use support::oracle::{oracle, units, OracleRow};

fn outcome(inst: &Instance, task: Task) -> Result<String, String> {
    match inst.exclusions.get(&task) {
        Some(reason) => Err(reason.code().to_string()),
        None => Ok(inst.class_name(task).expect("labeled").to_string()),
    }
}

fn label_dir(dir: &Path, lookback: u32) -> (Corpus, Vec<Instance>) {
    let (corpus, report) = load_corpus(dir, None).unwrap();
    assert!(report.is_accepted());
    let mut instances = build_instances(&corpus, WindowConfig { lookback });
    label_all(&mut instances, &corpus, Fixed4::ZERO);
    (corpus, instances)
}

fn as_rows(instances: &[Instance]) -> BTreeMap<(String, String), OracleRow> {
    instances
        .iter()
        .map(|i| {
            let key = (i.stock.to_string(), i.anchor_day.date.to_string());
            let row = OracleRow {
                window: i.window.iter().map(|n| n.id.clone()).collect(),
                timing: outcome(i, Task::Timing),
                view: outcome(i, Task::View),
                trading: outcome(i, Task::Trading),
            };
            (key, row)
        })
        .collect()
}

#[test]
fn labeler_matches_oracle_and_ground_truth_on_three_corpora() {
    for seed in [7, 11, 23] {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec { seed, ..SynthSpec::default() };
        let synth = generate_stream(&spec).unwrap();
        synth.write_to(dir.path()).unwrap();

        let started = Instant::now();
        let (_, instances) = label_dir(dir.path(), 5);
        let elapsed = started.elapsed();
        assert!(instances.len() >= 1000, "seed {seed}: {} instances", instances.len());
        assert!(elapsed.as_secs_f64() < 10.0, "seed {seed}: {elapsed:?}");

        let ours = as_rows(&instances);
        let expected = oracle(dir.path(), 5);
        assert_eq!(ours.len(), expected.len(), "seed {seed}: candidate count");
        for (key, row) in &expected {
            assert_eq!(ours.get(key), Some(row), "seed {seed}: {key:?}");
        }

        assert_eq!(synth.ground_truth.len(), instances.len());
        for (g, inst) in synth.ground_truth.iter().zip(&instances) {
            assert_eq!((&g.stock, g.anchor_day), (&inst.stock, inst.anchor_day));
            assert_eq!(g.timing_label, inst.timing_label, "{}", inst.key());
            assert_eq!(g.view_label, inst.view_label, "{}", inst.key());
            assert_eq!(g.trading_label, inst.trading_label, "{}", inst.key());
            assert_eq!(g.exclusions, inst.exclusions, "{}", inst.key());
        }
    }
}

#[test]
fn every_labeled_task_has_one_provenance_record() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { n_stocks: 8, n_days: 60, ..SynthSpec::default() };
    generate_stream(&spec).unwrap().write_to(dir.path()).unwrap();
    let (_, instances) = label_dir(dir.path(), 5);
    for inst in &instances {
        for task in Task::ALL {
            let n = inst.provenance.iter().filter(|p| p.task == task).count();
            assert_eq!(n, 1, "{} {task:?}", inst.key());
        }
    }
}

fn small_corpus(seed: u64, dir: &Path) {
    let spec = SynthSpec { seed, n_stocks: 4, n_days: 40, ..SynthSpec::default() };
    generate_stream(&spec).unwrap().write_to(dir).unwrap();
}

fn scale_amount(text: &str, k: i128) -> String {
    let v = units(text) * k;
    format!("{}.{:04}", v / 10_000, v % 10_000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn adding_a_report_never_unreleases(seed in 0u64..1000, pick in any::<prop::sample::Index>()) {
        let dir = tempfile::tempdir().unwrap();
        small_corpus(seed, dir.path());
        let (corpus, before) = label_dir(dir.path(), 5);
        let target = pick.get(&before);
        let next = target.anchor_day.ordinal + 1;
        prop_assume!((next as usize) < corpus.calendar.len());
        let next_date = corpus.calendar.day(next).unwrap().date;
        let path = dir.path().join("reports.jsonl");
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str(&format!(
            "{{\"stock\":\"{}\",\"date\":\"{}\",\"analyst_id\":\"EXTRA\"}}\n",
            target.stock, next_date
        ));
        std::fs::write(&path, text).unwrap();
        let (_, after) = label_dir(dir.path(), 5);
        for (b, a) in before.iter().zip(&after) {
            if b.timing_label == Some(a3_core::domain::TimingLabel::ReleaseReport) {
                prop_assert_eq!(a.timing_label, b.timing_label);
            }
        }
        let hit = after.iter().find(|i| i.key() == target.key()).unwrap();
        prop_assert_eq!(hit.timing_label, Some(a3_core::domain::TimingLabel::ReleaseReport));
    }

    #[test]
    fn scaling_trades_keeps_trading_labels(seed in 0u64..1000, k in 2i128..1000) {
        let dir = tempfile::tempdir().unwrap();
        small_corpus(seed, dir.path());
        let (_, before) = label_dir(dir.path(), 5);
        let path = dir.path().join("trades.jsonl");
        let scaled: String = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                for f in ["buy_amount", "sell_amount"] {
                    let s = scale_amount(v[f].as_str().unwrap(), k);
                    v[f] = serde_json::Value::from(s);
                }
                format!("{v}\n")
            })
            .collect();
        std::fs::write(&path, scaled).unwrap();
        let (_, after) = label_dir(dir.path(), 5);
        for (b, a) in before.iter().zip(&after) {
            prop_assert_eq!(outcome(b, Task::Trading), outcome(a, Task::Trading));
        }
    }
}
