//! One PASS/FAIL line per primary acceptance criterion. Runs without the
//! test harness so the lines always reach the console.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;
#[path = "../../core/tests/support/rouge.rs"]
mod rouge;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use a3_core::cod::compose::scoped_items;
use a3_core::cod::InputScope;
use a3_core::corpus::load_corpus;
use a3_core::domain::{Fixed4, Instance, Task, WindowConfig};
use a3_core::labeler::{build_instances, label_all, read_dataset, LabeledDataset, SplitName, SplitRatios};
use a3_core::pmi::{compute_pmi_from_docs, PmiConfig};
use a3_core::synth::{generate_stream, CuePlacement, SynthSpec};
use rand::{Rng, SeedableRng};
use serde_json::Value;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn a3(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_a3"))
        .args(args)
        .current_dir(dir)
        .env_remove("A3_CACHE_DIR")
        .output()
        .expect("a3 binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = a3(dir, args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "`a3 {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture_plugin() -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/stub_plugin.py");
    format!("python3 {}", p.canonicalize().expect("fixture plugin").display())
}

fn outcome(inst: &Instance, task: Task) -> Result<String, String> {
    match inst.exclusions.get(&task) {
        Some(reason) => Err(reason.code().to_string()),
        None => Ok(inst.class_name(task).expect("labeled").to_string()),
    }
}

fn oracle_equivalence(tmp: &Path) -> Check {
    let mut worst = 0.0f64;
    let mut total = 0;
    for seed in [7u64, 11, 23] {
        let dir = tmp.join(format!("oracle-{seed}"));
        ok(tmp, &["synth", "--seed", &seed.to_string(), "--out", dir.to_str().unwrap()])?;
        let spec = SynthSpec { seed, ..SynthSpec::default() };
        let truth = generate_stream(&spec).map_err(|e| e.to_string())?.ground_truth;

        let started = Instant::now();
        let (corpus, _) = load_corpus(&dir, None).map_err(|e| e.to_string())?;
        let mut instances = build_instances(&corpus, WindowConfig { lookback: 5 });
        label_all(&mut instances, &corpus, Fixed4::ZERO);
        let secs = started.elapsed().as_secs_f64();
        worst = worst.max(secs);
        ensure(secs < 10.0, || format!("seed {seed}: labeling took {secs:.2}s"))?;
        ensure(instances.len() >= 1000, || format!("seed {seed}: only {} instances", instances.len()))?;

        let expected = oracle::oracle(&dir, 5);
        ensure(expected.len() == instances.len(), || {
            format!("seed {seed}: oracle has {} candidates, labeler {}", expected.len(), instances.len())
        })?;
        ensure(truth.len() == instances.len(), || format!("seed {seed}: ground truth size differs"))?;
        for (inst, g) in instances.iter().zip(&truth) {
            let key = (inst.stock.to_string(), inst.anchor_day.date.to_string());
            let row = oracle::OracleRow {
                window: inst.window.iter().map(|n| n.id.clone()).collect(),
                timing: outcome(inst, Task::Timing),
                view: outcome(inst, Task::View),
                trading: outcome(inst, Task::Trading),
            };
            ensure(expected.get(&key) == Some(&row), || format!("seed {seed}: oracle disagrees at {key:?}"))?;
            let same = (&g.stock, g.anchor_day, g.timing_label, g.view_label, g.trading_label, &g.exclusions)
                == (&inst.stock, inst.anchor_day, inst.timing_label, inst.view_label, inst.trading_label, &inst.exclusions);
            ensure(same, || format!("seed {seed}: ground truth disagrees at {}", inst.key()))?;
        }
        total += instances.len();
    }
    Ok(format!("{total} instances over 3 corpora, slowest {worst:.2}s"))
}

fn label_cli(tmp: &Path, corpus: &Path, out: &Path, extra: &[&str]) -> Result<LabeledDataset, String> {
    let mut args = vec!["label", "--corpus", corpus.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(tmp, &args)?;
    read_dataset(out).map_err(|e| e.to_string())
}

fn balance_and_split_sizes(tmp: &Path) -> Check {
    let ratios: SplitRatios = "0.8,0.1,0.1".parse().map_err(|e| format!("{e}"))?;
    let mut shapes = Vec::new();
    for seed in [7u64, 11, 23] {
        let corpus = tmp.join(format!("bal-{seed}"));
        let s = seed.to_string();
        ok(tmp, &["synth", "--seed", &s, "--out", corpus.to_str().unwrap()])?;
        let ds = label_cli(
            tmp,
            &corpus,
            &tmp.join(format!("bal-{seed}.jsonl")),
            &["--T", "5", "--seed", &s, "--negative-ratio", "1.0", "--ratios", "0.8,0.1,0.1"],
        )?;
        let sampling = ds.sampling.clone().unwrap_or_default();
        ensure(sampling.warning.is_none() && sampling.negatives == sampling.positives, || {
            format!("seed {seed}: sampling {sampling:?}")
        })?;
        let timing = ds.class_counts(Task::Timing);
        for name in SplitName::ALL {
            let c = &timing[&name];
            ensure(c["ReleaseReport"] == c["NotReleaseReport"], || format!("seed {seed} {name:?}: {c:?}"))?;
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
                for (name, ratio) in SplitName::ALL.iter().zip(ratios.parts()) {
                    let n = counts[name][*class] as u64;
                    assigned += n;
                    ensure((n * ratio.denom()).abs_diff(total * ratio.numer()) < *ratio.denom(), || {
                        format!("seed {seed} {task} {class} {name:?}: {n} of {total}")
                    })?;
                }
                ensure(assigned == total, || format!("seed {seed} {task} {class}: {assigned} of {total} assigned"))?;
            }
        }
        let c = &timing;
        shapes.push(format!(
            "{}/{}/{}",
            c[&SplitName::Train]["ReleaseReport"],
            c[&SplitName::Dev]["ReleaseReport"],
            c[&SplitName::Test]["ReleaseReport"]
        ));
    }
    Ok(format!("timing per-class train/dev/test {}", shapes.join(", ")))
}

fn accounting(ds: &LabeledDataset) -> Result<[usize; 3], String> {
    let mut excluded = [0; 3];
    for (k, task) in Task::ALL.iter().enumerate() {
        let t = ds.totals(*task);
        ensure(t.labeled + t.excluded == ds.instances.len(), || {
            format!("{task}: {} + {} != {}", t.labeled, t.excluded, ds.instances.len())
        })?;
        excluded[k] = t.excluded;
    }
    Ok(excluded)
}

fn exclusion_accounting(tmp: &Path) -> Check {
    let corpus = tmp.join("excl");
    ok(tmp, &["synth", "--out", corpus.to_str().unwrap()])?;
    let before = accounting(&label_cli(tmp, &corpus, &tmp.join("excl-a.jsonl"), &[])?)?;

    // Inject missing price targets.
    let path = corpus.join("price_targets.jsonl");
    let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let kept: String = text
        .lines()
        .enumerate()
        .filter(|(i, _)| i % 5 != 4)
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    fs::write(&path, kept).map_err(|e| e.to_string())?;
    let ds = label_cli(tmp, &corpus, &tmp.join("excl-b.jsonl"), &[])?;
    let after = accounting(&ds)?;
    ensure(after[1] > before[1], || format!("view exclusions did not grow: {before:?} -> {after:?}"))?;
    ensure(after[1] != after[2], || "view and trading exclusions coincide".into())?;
    Ok(format!(
        "{} instances; excluded timing/view/trading {}/{}/{} before injection, {}/{}/{} after",
        ds.instances.len(),
        before[0],
        before[1],
        before[2],
        after[0],
        after[1],
        after[2]
    ))
}

fn pmi_correctness(tmp: &Path) -> Check {
    let doc = |words: &[&str], class: &str| -> (BTreeSet<String>, String) {
        (words.iter().map(|w| w.to_string()).collect(), class.to_string())
    };
    let docs = vec![
        doc(&["tariff", "market"], "Release"),
        doc(&["tariff", "market"], "Release"),
        doc(&["market", "quiet"], "NotRelease"),
        doc(&["market"], "NotRelease"),
    ];
    let cfg = PmiConfig { min_df: 1, smoothing: Fixed4::ZERO, log_base: 2.0 };
    let table = compute_pmi_from_docs(&docs, &[], &cfg).map_err(|e| e.to_string())?;
    let s = table.score("tariff", "Release").ok_or("no tariff score")?;
    ensure((s - 1.0).abs() < 1e-9, || format!("score(tariff, Release) = {s}"))?;

    let mut spec = SynthSpec { n_stocks: 30, n_days: 120, ..SynthSpec::default() };
    for words in spec.lexicon.values_mut() {
        words.truncate(1);
    }
    let spec_path = tmp.join("pmi-spec.json");
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).map_err(|e| e.to_string())?;
    let corpus = tmp.join("pmi-corpus");
    ok(tmp, &["synth", "--spec", spec_path.to_str().unwrap(), "--out", corpus.to_str().unwrap()])?;
    let dataset = tmp.join("pmi.jsonl");
    label_cli(tmp, &corpus, &dataset, &["--T", "0"])?;
    let mut hits = 0;
    for task in Task::ALL {
        let out = tmp.join(format!("pmi-{task}.csv"));
        let stdout = ok(
            tmp,
            &["pmi", "--dataset", dataset.to_str().unwrap(), "--task", task.as_str(), "--k", "1", "--out", out.to_str().unwrap()],
        )?;
        let top: BTreeMap<&str, &str> = stdout
            .lines()
            .skip(1)
            .filter_map(|l| {
                let f: Vec<&str> = l.split('\t').collect();
                (f.len() >= 3).then(|| (f[0], f[2]))
            })
            .collect();
        for class in task.classes() {
            let marker = &spec.lexicon[*class][0];
            ensure(top.get(class) == Some(&marker.as_str()), || {
                format!("{task} {class}: top term {:?}, planted {marker}", top.get(class))
            })?;
            hits += 1;
        }
    }
    Ok(format!("hand score 1.0 (|err| {:.1e}); planted marker top-1 for {hits}/8 classes", (s - 1.0).abs()))
}

fn rouge_correctness() -> Check {
    rouge::fixtures()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let alphabet = ["a", "b", "c", "d", "e", "f"];
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, max: usize| -> Vec<String> {
        let n = rng.gen_range(0..=max);
        (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string()).collect()
    };
    for _ in 0..10_000 {
        let a = draw(&mut rng, 12);
        let b = draw(&mut rng, 12);
        let extra = draw(&mut rng, 6);
        rouge::symmetry(&a, &b)?;
        rouge::monotonicity(&a, &extra, &b)?;
    }
    Ok("3 fixtures; symmetry and monotonicity over 10000 random pairs".into())
}

fn test_accuracy(report: &Path) -> Result<f64, String> {
    let v: Value = serde_json::from_str(&fs::read_to_string(report).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let test = &v["metrics"]["test"];
    let (c, n) = (test["correct"].as_f64(), test["size"].as_f64());
    match (c, n) {
        (Some(c), Some(n)) if n > 0.0 => Ok(c / n),
        _ => Err(format!("{}: no test metrics", report.display())),
    }
}

fn cod_direction(tmp: &Path) -> Check {
    let started = Instant::now();
    let spec = SynthSpec { cue_placement: CuePlacement::Headline, ..SynthSpec::default() };
    let spec_path = tmp.join("cod-spec.json");
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).map_err(|e| e.to_string())?;
    let corpus = tmp.join("cod-corpus");
    ok(tmp, &["synth", "--spec", spec_path.to_str().unwrap(), "--out", corpus.to_str().unwrap()])?;
    let dataset = tmp.join("cod.jsonl");
    label_cli(tmp, &corpus, &dataset, &[])?;
    let ds = dataset.to_str().unwrap();
    let cache = tmp.join("cod-cache");
    let mut parts = Vec::new();
    for task in Task::ALL {
        let base_dir = tmp.join(format!("cod-base-{task}"));
        let cod_dir = tmp.join(format!("cod-cod-{task}"));
        ok(tmp, &["run", "--dataset", ds, "--task", task.as_str(), "--scope", "anchor", "--out", base_dir.to_str().unwrap()])?;
        ok(
            tmp,
            &[
                "run", "--dataset", ds, "--task", task.as_str(), "--scope", "anchor", "--generator", "stub-cue",
                "--mode", "news_then_opinion", "--cache-dir", cache.to_str().unwrap(), "--out", cod_dir.to_str().unwrap(),
            ],
        )?;
        let base = test_accuracy(&base_dir.join("report.json"))?;
        let cod = test_accuracy(&cod_dir.join("report.json"))?;
        ensure(cod - base >= 0.20, || format!("{task}: baseline {base:.4}, CoD {cod:.4}"))?;
        parts.push(format!("{task} {:.1}->{:.1}", base * 100.0, cod * 100.0));
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{} in {secs:.1}s", parts.join(", ")))
}

fn determinism(tmp: &Path) -> Check {
    let corpus = tmp.join("det-corpus");
    ok(tmp, &["synth", "--seed", "5", "--out", corpus.to_str().unwrap()])?;
    let mut datasets = Vec::new();
    for (tag, jobs) in [("a", "1"), ("b", "8"), ("c", "8")] {
        let out = tmp.join(format!("det-{tag}.jsonl"));
        label_cli(tmp, &corpus, &out, &["--seed", "3", "--jobs", jobs])?;
        datasets.push(fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure(datasets.windows(2).all(|w| w[0] == w[1]), || "dataset.jsonl differs across runs or --jobs".into())?;

    let ds = tmp.join("det-a.jsonl");
    let mut payloads = Vec::new();
    for (tag, jobs) in [("a", "1"), ("b", "8"), ("c", "8")] {
        let out = tmp.join(format!("det-run-{tag}"));
        let cache = tmp.join(format!("det-cache-{tag}"));
        ok(
            tmp,
            &[
                "run", "--dataset", ds.to_str().unwrap(), "--task", "view", "--generator", "stub-cue", "--seed", "3",
                "--jobs", jobs, "--cache-dir", cache.to_str().unwrap(), "--out", out.to_str().unwrap(),
            ],
        )?;
        let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let preds = fs::read(out.join("predictions.jsonl")).map_err(|e| e.to_string())?;
        payloads.push((serde_json::to_vec(&report["metrics"]).unwrap(), preds));
    }
    ensure(payloads.windows(2).all(|w| w[0] == w[1]), || "metrics or predictions differ across runs or --jobs".into())?;
    Ok(format!("{} dataset bytes and metric payloads identical over --jobs 1/8/8", datasets[0].len()))
}

fn fault_tolerance(tmp: &Path) -> Check {
    let corpus = tmp.join("fault-corpus");
    ok(tmp, &["synth", "--seed", "13", "--out", corpus.to_str().unwrap()])?;
    let dataset = tmp.join("fault.jsonl");
    let ds = label_cli(tmp, &corpus, &dataset, &[])?;
    let items: BTreeSet<&str> = ds
        .instances
        .iter()
        .flat_map(|i| scoped_items(i, InputScope::Window))
        .map(|n| n.id.as_str())
        .collect();
    let total = items.len();
    let half = total / 2;
    let trace = tmp.join("fault-trace.jsonl");
    let cache = tmp.join("fault-cache");
    let plugin = fixture_plugin();
    let run = |extra: &str, out: &str| {
        let generator = format!("{plugin} --trace {} {extra}", trace.display());
        a3(
            tmp,
            &[
                "generate", "--dataset", dataset.to_str().unwrap(), "--generator", &generator,
                "--cache-dir", cache.to_str().unwrap(), "--out", tmp.join(out).to_str().unwrap(),
            ],
        )
    };
    let first = run(&format!("--die-after {half}"), "fault-1.jsonl");
    ensure(first.status.code() == Some(2), || {
        format!("killed run exited {:?}: {}", first.status.code(), String::from_utf8_lossy(&first.stderr))
    })?;
    let second = run("", "fault-2.jsonl");
    ensure(second.status.success(), || format!("resume failed: {}", String::from_utf8_lossy(&second.stderr)))?;

    let prompts: Vec<String> = fs::read_to_string(&trace)
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).map(|v| v["prompt"].as_str().unwrap_or_default().to_string()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let distinct: BTreeSet<&String> = prompts.iter().collect();
    ensure(prompts.len() == total && distinct.len() == total, || {
        format!("{} requests ({} distinct) for {total} items", prompts.len(), distinct.len())
    })?;
    let opinions = fs::read_to_string(tmp.join("fault-2.jsonl")).map_err(|e| e.to_string())?;
    ensure(opinions.lines().count() == total, || "resumed run is missing opinions".into())?;
    let meta: Value = serde_json::from_str(&fs::read_to_string(tmp.join("fault-2.meta.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let hits = meta["stats"]["cache_hits"].as_u64().unwrap_or(0) as usize;
    ensure(hits == half, || format!("resume used {hits} cached opinions, expected {half}"))?;
    Ok(format!("{total} items: killed after {half}, resumed with {hits} cache hits, 0 duplicate requests"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root: PathBuf = tmp.path().to_path_buf();
    let criteria: Vec<Criterion> = vec![
        ("labeling oracle equivalence", Box::new(|| oracle_equivalence(&root))),
        ("class balance and split sizes", Box::new(|| balance_and_split_sizes(&root))),
        ("exclusion accounting", Box::new(|| exclusion_accounting(&root))),
        ("pmi correctness", Box::new(|| pmi_correctness(&root))),
        ("rouge correctness", Box::new(rouge_correctness)),
        ("cod direction check", Box::new(|| cod_direction(&root))),
        ("determinism", Box::new(|| determinism(&root))),
        ("fault tolerance", Box::new(|| fault_tolerance(&root))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
