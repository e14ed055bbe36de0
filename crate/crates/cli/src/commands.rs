use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use a3_core::cod::experiment::{write_report, ClassifierSpec, ExperimentConfig, GeneratorSpec};
use a3_core::cod::{
    compose::scoped_items, generate_opinions, run_experiment, ComposeMode, GenerationOptions, InputScope,
    OpinionCache, PromptTemplate,
};
use a3_core::corpus::load_corpus;
use a3_core::domain::{Fixed4, Instance, NewsItem, Task, WindowConfig};
use a3_core::ingest::IngestError;
use a3_core::labeler::{
    build_dataset, read_dataset, split_dataset, write_dataset, LabeledDataset, LabelingConfig, SplitName,
    SplitRatios,
};
use a3_core::metrics::{accuracy, macro_f1, per_class_scores, render4, rouge_l, rouge_n, RougeScore};
use a3_core::pmi::{compute_pmi, Direction, PmiConfig};
use a3_core::synth::{generate_stream, SynthSpec};
use a3_core::text::{tokenize, Tokenizer};
use a3_core::{write_atomic, TOOL_VERSION};
use serde_json::{json, Value};

/// stdout line that tolerates a closed pipe (`a3 pmi | head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

use crate::config::Settings;
use crate::error::CliError;

/// Resolved settings plus the snapshot embedded in outputs.
pub struct Ctx {
    pub s: Settings,
    pub config: Value,
}

fn parse<T: FromStr>(flag: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| CliError::Validation(format!("--{flag} {raw:?}: {e}")))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value");
    s.push('\n');
    s
}

/// `pmi.csv` -> `pmi.meta.json`.
fn meta_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

impl Ctx {
    fn path(&self, value: &Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
        value
            .clone()
            .ok_or_else(|| CliError::Validation(format!("missing --{flag}")))
    }

    fn corpus_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.path(&self.s.corpus, "corpus")?;
        if !dir.is_dir() {
            return Err(CliError::Validation(format!("--corpus {}: not a directory", dir.display())));
        }
        Ok(dir)
    }

    fn out(&self, default: &str) -> PathBuf {
        self.s.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn dataset(&self) -> Result<LabeledDataset, CliError> {
        let path = self.s.dataset.clone().unwrap_or_else(|| PathBuf::from("dataset.jsonl"));
        if !path.exists() {
            return Err(CliError::Validation(format!("--dataset {}: no such file", path.display())));
        }
        Ok(read_dataset(&path)?)
    }

    fn task(&self) -> Result<Task, CliError> {
        parse("task", self.s.task.as_deref().unwrap_or("timing"))
    }

    fn seed(&self) -> u64 {
        self.s.seed.unwrap_or(7)
    }

    fn ratios(&self) -> Result<SplitRatios, CliError> {
        parse("ratios", self.s.ratios.as_deref().unwrap_or("0.8,0.1,0.1"))
    }

    fn jobs(&self) -> usize {
        self.s.jobs.unwrap_or(4)
    }

    fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let generator: GeneratorSpec = parse("generator", self.s.generator.as_deref().unwrap_or("none"))?;
        let mode = match &self.s.mode {
            Some(m) => parse::<ComposeMode>("mode", m)?,
            None if generator == GeneratorSpec::None => ComposeMode::NewsOnly,
            None => ComposeMode::NewsThenOpinion,
        };
        let cue_lexicon = match &self.s.cue_lexicon {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Validation(format!("--cue-lexicon {}: {e}", p.display())))?;
                Some(
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::Validation(format!("--cue-lexicon {}: {e}", p.display())))?,
                )
            }
            None => None,
        };
        let cache_dir = std::env::var_os("A3_CACHE_DIR")
            .map(PathBuf::from)
            .or_else(|| self.s.cache_dir.clone())
            .unwrap_or_else(|| PathBuf::from("opinions.cache"));
        let config = ExperimentConfig {
            task: self.task()?,
            generator,
            template: self.s.prompt.clone().unwrap_or_else(|| "plain".into()),
            mode,
            scope: parse("scope", self.s.scope.as_deref().unwrap_or("window"))?,
            classifier: parse::<ClassifierSpec>("classifier", self.s.classifier.as_deref().unwrap_or("baseline"))?,
            seed: self.seed(),
            max_len: self.s.max_len.unwrap_or(512),
            generation: GenerationOptions {
                concurrency: self.s.concurrency.unwrap_or(8).min(self.jobs()),
                retries: self.s.retries.unwrap_or(2),
                ..GenerationOptions::default()
            },
            request_timeout_ms: self.s.timeout_ms.unwrap_or(30_000),
            cache_dir: Some(cache_dir),
            cue_lexicon,
        };
        config.validate()?;
        Ok(config)
    }
}

fn log_warnings<W: std::fmt::Display>(warnings: &[W]) {
    if !warnings.is_empty() {
        log::warn!("{} ingestion warnings (-v to list)", warnings.len());
    }
    for w in warnings {
        log::info!("{w}");
    }
}

pub fn ingest(ctx: &Ctx) -> Result<(), CliError> {
    let dir = ctx.corpus_dir()?;
    match load_corpus(&dir, ctx.s.calendar.as_deref()) {
        Ok((corpus, report)) => {
            log_warnings(&report.warnings);
            say!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if let Some(out) = &ctx.s.out {
                let corpus: Value = serde_json::from_str(&corpus.to_canonical_json()).expect("canonical json");
                let doc = json!({"tool_version": TOOL_VERSION, "config": ctx.config, "corpus": corpus});
                write(out, pretty(&doc).as_bytes())?;
            }
            Ok(())
        }
        Err(IngestError::Rejected(report)) => {
            say!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Err(IngestError::Rejected(report).into())
        }
        Err(e) => Err(e.into()),
    }
}

fn print_class_counts(ds: &LabeledDataset) {
    say!("task\tclass\ttrain\tdev\ttest");
    for task in Task::ALL {
        let counts = ds.class_counts(task);
        for class in task.classes() {
            let n = |s: SplitName| counts.get(&s).and_then(|c| c.get(*class)).copied().unwrap_or(0);
            say!(
                "{task}\t{class}\t{}\t{}\t{}",
                n(SplitName::Train),
                n(SplitName::Dev),
                n(SplitName::Test)
            );
        }
        let t = ds.totals(task);
        say!("{task}\t(labeled/excluded)\t{}\t{}\t", t.labeled, t.excluded);
    }
}

pub fn label(ctx: &Ctx) -> Result<(), CliError> {
    let dir = ctx.corpus_dir()?;
    let epsilon: Fixed4 = parse("epsilon", ctx.s.epsilon.as_deref().unwrap_or("0"))?;
    if epsilon.is_negative() {
        return Err(CliError::Validation("--epsilon must not be negative".into()));
    }
    let config = LabelingConfig {
        window: WindowConfig {
            lookback: ctx.s.lookback.unwrap_or(5),
        },
        epsilon,
        negative_ratio: ctx.s.negative_ratio.unwrap_or(1.0),
        ratios: ctx.ratios()?,
        seed: ctx.seed(),
    };
    let (corpus, report) = load_corpus(&dir, ctx.s.calendar.as_deref())?;
    log_warnings(&report.warnings);
    let ds = build_dataset(&corpus, &config, ctx.config.clone())?;
    let out = ctx.out("dataset.jsonl");
    write_dataset(&out, &ds).map_err(CliError::runtime)?;
    log::info!("wrote {} instances to {}", ds.instances.len(), out.display());
    print_class_counts(&ds);
    Ok(())
}

pub fn split(ctx: &Ctx) -> Result<(), CliError> {
    let mut ds = ctx.dataset()?;
    let ratios = ctx.ratios()?;
    let seed = ctx.seed();
    for task in Task::ALL {
        let s = split_dataset(&ds.instances, &ratios, seed, task)?;
        ds.splits.insert(task, s);
    }
    ds.seed = seed;
    ds.config = ctx.config.clone();
    let out = ctx
        .s
        .out
        .clone()
        .or_else(|| ctx.s.dataset.clone())
        .unwrap_or_else(|| PathBuf::from("dataset.jsonl"));
    write_dataset(&out, &ds).map_err(CliError::runtime)?;
    print_class_counts(&ds);
    Ok(())
}

fn parse_unions(task: Task, raw: &[String]) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for spec in raw {
        let (name, members) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--union {spec:?}: expected NAME=ClassA,ClassB")))?;
        for m in members.split(',').map(str::trim) {
            if !task.classes().contains(&m) {
                return Err(CliError::Validation(format!(
                    "--union {spec:?}: {m:?} is not a {task} class ({})",
                    task.classes().join(", ")
                )));
            }
            if map.insert(m.to_string(), name.trim().to_string()).is_some() {
                return Err(CliError::Validation(format!("--union: {m} appears in two unions")));
            }
        }
    }
    Ok(map)
}

pub fn pmi(ctx: &Ctx) -> Result<(), CliError> {
    let ds = ctx.dataset()?;
    let task = ctx.task()?;
    let unions = parse_unions(task, ctx.s.union.as_deref().unwrap_or(&[]))?;
    let class_name = |c: &str| unions.get(c).cloned().unwrap_or_else(|| c.to_string());
    let declared: Vec<String> = task
        .classes()
        .iter()
        .map(|c| class_name(c))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let instances: Vec<Instance> = match ctx.s.split.as_deref().unwrap_or("all") {
        "all" => ds.instances.clone(),
        "train" => ds.split_instances(task, SplitName::Train).cloned().collect(),
        "dev" => ds.split_instances(task, SplitName::Dev).cloned().collect(),
        "test" => ds.split_instances(task, SplitName::Test).cloned().collect(),
        other => {
            return Err(CliError::Validation(format!(
                "--split {other:?}: expected all, train, dev or test"
            )))
        }
    };
    let tokenizer = match &ctx.s.lexicon {
        Some(p) => Tokenizer::from_lexicon_text(
            &std::fs::read_to_string(p).map_err(|e| CliError::Validation(format!("--lexicon {}: {e}", p.display())))?,
        ),
        None => Tokenizer::new(),
    };
    let config = PmiConfig {
        min_df: ctx.s.min_df.unwrap_or(1),
        smoothing: parse("alpha", ctx.s.alpha.as_deref().unwrap_or("0.5"))?,
        log_base: ctx.s.log_base.unwrap_or(2.0),
    };
    if config.smoothing.is_negative() {
        return Err(CliError::Validation("--alpha must not be negative".into()));
    }
    if !(config.log_base > 0.0 && config.log_base != 1.0 && config.log_base.is_finite()) {
        return Err(CliError::Validation("--log-base must be positive and not 1".into()));
    }
    let table = compute_pmi(
        &instances,
        |i| i.class_name(task).map(class_name),
        &declared,
        &tokenizer,
        &config,
    )?;
    let out = ctx.out("pmi.csv");
    write(&out, table.to_csv().as_bytes())?;
    write(
        &meta_path(&out),
        pretty(&json!({
            "tool_version": TOOL_VERSION,
            "config": ctx.config,
            "classes": table.classes,
            "class_sizes": table.class_sizes,
            "documents": table.total_docs,
            "vocabulary": table.vocabulary.len(),
        }))
        .as_bytes(),
    )?;

    let direction: Direction = parse("direction", ctx.s.direction.as_deref().unwrap_or("highest"))?;
    let k = ctx.s.k.unwrap_or(5);
    let classes: Vec<String> = match &ctx.s.class {
        Some(c) => vec![c.clone()],
        None => table.classes.clone(),
    };
    say!("class\trank\tterm\tscore\tdoc_freq");
    for class in &classes {
        for (rank, kw) in table.top_keywords(class, k, direction)?.iter().enumerate() {
            say!(
                "{class}\t{}\t{}\t{}\t{}",
                rank + 1,
                kw.term,
                a3_core::pmi::format_score(kw.score),
                kw.doc_freq
            );
        }
    }
    Ok(())
}

pub fn synth(ctx: &Ctx) -> Result<(), CliError> {
    let mut spec = match &ctx.s.spec {
        Some(p) => SynthSpec::from_json(
            &std::fs::read_to_string(p).map_err(|e| CliError::Validation(format!("--spec {}: {e}", p.display())))?,
        )?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = ctx.s.seed {
        spec.seed = seed;
    }
    let corpus = generate_stream(&spec)?;
    let out = ctx.out("synth");
    corpus.write_to(&out)?;
    write(
        &out.join("synth.meta.json"),
        pretty(&json!({"tool_version": TOOL_VERSION, "config": ctx.config, "spec": spec})).as_bytes(),
    )?;
    log::info!(
        "wrote {} candidates for {} stocks x {} days to {}",
        corpus.ground_truth.len(),
        spec.n_stocks,
        spec.n_days,
        out.display()
    );
    Ok(())
}

pub fn generate(ctx: &Ctx) -> Result<(), CliError> {
    let ds = ctx.dataset()?;
    let mut config = ctx.experiment()?;
    if config.generator == GeneratorSpec::None {
        return Err(CliError::Validation("--generator is required for generate".into()));
    }
    config.scope = parse::<InputScope>("scope", ctx.s.scope.as_deref().unwrap_or("window"))?;
    let generator = config.instantiate_generator()?;
    let template = PromptTemplate::resolve(&config.template)?;
    let items: Vec<&NewsItem> = ds.instances.iter().flat_map(|i| scoped_items(i, config.scope)).collect();
    let cache = config.cache_dir.as_ref().map(OpinionCache::new);
    let (opinions, stats) = generate_opinions(&items, generator.as_ref(), &template, cache.as_ref(), &config.generation)?;
    let mut body = String::new();
    for op in opinions.values() {
        body.push_str(&serde_json::to_string(op).expect("opinion serializes"));
        body.push('\n');
    }
    let out = ctx.out("opinions.jsonl");
    write(&out, body.as_bytes())?;
    write(
        &meta_path(&out),
        pretty(&json!({"tool_version": TOOL_VERSION, "config": ctx.config, "stats": stats})).as_bytes(),
    )?;
    log::info!(
        "{} opinions ({} cached, {} requests, {} errored)",
        stats.items,
        stats.cache_hits,
        stats.requests,
        stats.errored
    );
    Ok(())
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let config = ctx.experiment()?;
    let ds = ctx.dataset()?;
    let mut report = run_experiment(&ds, &config)?;
    report.config = ctx.config.clone();
    let out = ctx.out("run");
    std::fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    write_report(&out.join("report.json"), &report)?;
    write(&out.join("predictions.jsonl"), report.predictions_jsonl().as_bytes())?;
    let m = &report.metrics;
    say!("split\tsize\taccuracy\tmacro_f1");
    say!("dev\t{}\t{}\t{}", m.dev.size, m.dev.accuracy, m.dev.macro_f1);
    say!("test\t{}\t{}\t{}", m.test.size, m.test.accuracy, m.test.macro_f1);
    let g = &report.runtime.generation;
    if report.runtime.generator.is_some() {
        log::info!(
            "opinions: {} items, {} cache hits, {} requests, {} errored",
            g.items,
            g.cache_hits,
            g.requests,
            g.errored
        );
    }
    Ok(())
}

fn read_records(path: &Path, flag: &str) -> Result<BTreeMap<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("--{flag} {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line)
            .map_err(|e| CliError::Validation(format!("{}:{}: {e}", path.display(), n + 1)))?;
        let key = v
            .get("key")
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::Validation(format!("{}:{}: missing \"key\"", path.display(), n + 1)))?
            .to_string();
        if out.insert(key.clone(), v).is_some() {
            return Err(CliError::Validation(format!("{}: duplicate key {key:?}", path.display())));
        }
    }
    Ok(out)
}

fn field(v: &Value, name: &str, key: &str) -> Result<String, CliError> {
    v.get(name)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| CliError::Validation(format!("record {key:?} lacks a string \"{name}\"")))
}

fn mean_rouge(scores: &[RougeScore]) -> RougeScore {
    let n = scores.len().max(1) as f64;
    RougeScore {
        precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
    }
}

/// Classification metrics when records carry `label`, ROUGE when they
/// carry `text`.
pub fn eval(ctx: &Ctx) -> Result<(), CliError> {
    let pred = read_records(&ctx.path(&ctx.s.pred, "pred")?, "pred")?;
    let gold = read_records(&ctx.path(&ctx.s.gold, "gold")?, "gold")?;
    let missing: Vec<&String> = gold.keys().filter(|k| !pred.contains_key(*k)).collect();
    let extra: Vec<&String> = pred.keys().filter(|k| !gold.contains_key(*k)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(CliError::Validation(format!(
            "pred/gold keys differ: {} missing from pred (e.g. {:?}), {} unknown (e.g. {:?})",
            missing.len(),
            missing.first(),
            extra.len(),
            extra.first()
        )));
    }
    if gold.is_empty() {
        return Err(CliError::Validation("--gold has no records".into()));
    }
    let textual = gold.values().next().is_some_and(|v| v.get("text").is_some());
    let metrics = if textual {
        let mut r1 = Vec::new();
        let mut r2 = Vec::new();
        let mut rl = Vec::new();
        for (key, g) in &gold {
            let cand = tokenize(&field(&pred[key], "text", key)?);
            let refr = tokenize(&field(g, "text", key)?);
            r1.push(rouge_n(&cand, &refr, 1));
            r2.push(rouge_n(&cand, &refr, 2));
            rl.push(rouge_l(&cand, &refr));
        }
        let (r1, r2, rl) = (mean_rouge(&r1), mean_rouge(&r2), mean_rouge(&rl));
        say!("metric\tprecision\trecall\tf1");
        for (name, s) in [("rouge-1", r1), ("rouge-2", r2), ("rouge-l", rl)] {
            say!("{name}\t{:.4}\t{:.4}\t{:.4}", s.precision, s.recall, s.f1);
        }
        json!({"kind": "generation", "n": gold.len(), "rouge_1": r1, "rouge_2": r2, "rouge_l": rl})
    } else {
        let mut preds = Vec::new();
        let mut golds = Vec::new();
        for (key, g) in &gold {
            golds.push(field(g, "label", key)?);
            preds.push(field(&pred[key], "label", key)?);
        }
        let classes: Vec<String> = golds.iter().chain(&preds).cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let acc = accuracy(&preds, &golds)?;
        let f1 = macro_f1(&preds, &golds, &classes)?;
        let per_class = per_class_scores(&preds, &golds, &classes)?;
        say!("class\tprecision\trecall\tf1\tsupport");
        for c in &per_class {
            say!("{}\t{:.4}\t{:.4}\t{:.4}\t{}", c.class, c.precision, c.recall, c.f1, c.support);
        }
        say!("accuracy\t{}\nmacro_f1\t{f1:.4}", render4(acc));
        json!({
            "kind": "classification",
            "n": golds.len(),
            "accuracy": render4(acc),
            "macro_f1": format!("{f1:.4}"),
            "per_class": per_class,
        })
    };
    let doc = json!({"tool_version": TOOL_VERSION, "config": ctx.config, "metrics": metrics});
    write(&ctx.out("metrics.json"), pretty(&doc).as_bytes())
}
