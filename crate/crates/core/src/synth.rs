//! Seeded synthetic corpora with labels known by construction.
//!
//! For every (stock, day) with news the generator first draws the three
//! outcomes for the following trading day, then emits the reports, price
//! targets and trades that realize them, and plants one cue word per
//! labeled task into that day's first news item. Ground truth is the drawn
//! outcomes themselves; it never goes through the labeler.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    ExclusionReason, Fixed4, StockId, Task, TimingLabel, TradingDay, TradingLabel, ViewLabel,
};
use crate::fsutil::write_atomic;
use crate::ingest::{CALENDAR_FILE, NEWS_FILE, PRICE_TARGETS_FILE, REPORTS_FILE, TRADES_FILE};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";

/// Neutral words used to pad news bodies.
pub const FILLER_WORDS: &[&str] = &[
    "company", "shares", "quarter", "revenue", "board", "meeting", "plant", "supply", "customer",
    "price", "market", "sales", "order", "factory", "capacity", "product", "segment", "region",
    "export", "import", "dollar", "investor", "chairman", "director", "annual", "monthly",
    "report", "statement", "filing", "exchange", "listing", "industry", "sector", "peer",
    "competitor", "partner", "contract", "project", "research", "design", "wafer", "panel",
    "memory", "server", "phone", "vehicle", "battery", "steel", "shipping", "container",
    "bank", "loan", "insurance", "fund", "bond", "yield", "inventory", "channel", "retail",
    "online", "store", "brand", "launch", "season", "holiday", "weather", "energy", "power",
    "water", "land", "building", "office", "staff", "hiring", "training", "software",
    "hardware", "cloud", "network", "signal", "chip", "tool", "machine",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
    #[error("writing synthetic corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("reading synthetic spec: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CuePlacement {
    Body,
    Headline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViewRates {
    pub upgrade: f64,
    pub downgrade: f64,
    pub keep: f64,
    pub missing: f64,
}

impl Default for ViewRates {
    fn default() -> Self {
        ViewRates {
            upgrade: 0.15,
            downgrade: 0.1,
            keep: 0.65,
            missing: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradingRates {
    pub overweight: f64,
    pub underweight: f64,
    pub no_action: f64,
    pub tie: f64,
}

impl Default for TradingRates {
    fn default() -> Self {
        TradingRates {
            overweight: 0.42,
            underweight: 0.4,
            no_action: 0.12,
            tie: 0.06,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_stocks: usize,
    pub n_days: usize,
    pub start_date: NaiveDate,
    /// Probability that a stock has news on a trading day.
    pub news_rate: f64,
    /// Probability of a second item on a news day.
    pub extra_news_rate: f64,
    /// Probability that an item for the first session after a closed day is
    /// dated on the closed day instead (ingestion shifts it forward).
    pub weekend_news_rate: f64,
    pub filler_words_per_item: usize,
    /// P(report on t+1) for a candidate.
    pub report_prob: f64,
    /// P(report on d+1) when d has no news.
    pub background_report_prob: f64,
    pub view: ViewRates,
    pub trading: TradingRates,
    /// P(some institutional trades on d+1) when d has no news.
    pub background_trade_prob: f64,
    pub max_trades_per_day: usize,
    pub max_trade_amount: Fixed4,
    /// Probability that a planted cue names the true class; otherwise it
    /// names another class of the same task.
    pub cue_fidelity: f64,
    pub cue_placement: CuePlacement,
    /// Cue words per class name.
    pub lexicon: BTreeMap<String, Vec<String>>,
}

pub fn default_lexicon() -> BTreeMap<String, Vec<String>> {
    [
        ("ReleaseReport", ["tradewar", "bulkorder"]),
        ("NotReleaseReport", ["quietsession", "minornotice"]),
        ("Upgrade", ["honeymoon", "newhigh"]),
        ("Downgrade", ["slowdown", "gapdown"]),
        ("Keep", ["steadyguide", "inline"]),
        ("Overweight", ["grossmargin", "epsbeat"]),
        ("Underweight", ["exdividend", "ownershipchange"]),
        ("NoAction", ["holidaylull", "thinvolume"]),
    ]
    .into_iter()
    .map(|(c, w)| (c.to_string(), w.iter().map(|s| s.to_string()).collect()))
    .collect()
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 7,
            n_stocks: 50,
            n_days: 250,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 2).expect("valid date"),
            news_rate: 0.35,
            extra_news_rate: 0.25,
            weekend_news_rate: 0.05,
            filler_words_per_item: 12,
            report_prob: 0.4,
            background_report_prob: 0.2,
            view: ViewRates::default(),
            trading: TradingRates::default(),
            background_trade_prob: 0.8,
            max_trades_per_day: 4,
            max_trade_amount: Fixed4::from_int(5_000_000),
            cue_fidelity: 1.0,
            cue_placement: CuePlacement::Body,
            lexicon: default_lexicon(),
        }
    }
}

const CLASSES: [(Task, &str); 8] = [
    (Task::Timing, "ReleaseReport"),
    (Task::Timing, "NotReleaseReport"),
    (Task::View, "Upgrade"),
    (Task::View, "Downgrade"),
    (Task::View, "Keep"),
    (Task::Trading, "Overweight"),
    (Task::Trading, "Underweight"),
    (Task::Trading, "NoAction"),
];

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let spec: SynthSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.n_stocks == 0 || self.n_stocks > 8_999 {
            return bad(format!("n_stocks {} not in 1..=8999", self.n_stocks));
        }
        if self.n_days < 2 {
            return bad("n_days must be at least 2".into());
        }
        if self.max_trades_per_day == 0 {
            return bad("max_trades_per_day must be at least 1".into());
        }
        if !self.max_trade_amount.is_positive() {
            return bad("max_trade_amount must be positive".into());
        }
        let probs = [
            ("news_rate", self.news_rate),
            ("extra_news_rate", self.extra_news_rate),
            ("weekend_news_rate", self.weekend_news_rate),
            ("report_prob", self.report_prob),
            ("background_report_prob", self.background_report_prob),
            ("background_trade_prob", self.background_trade_prob),
            ("cue_fidelity", self.cue_fidelity),
            ("view.upgrade", self.view.upgrade),
            ("view.downgrade", self.view.downgrade),
            ("view.keep", self.view.keep),
            ("view.missing", self.view.missing),
            ("trading.overweight", self.trading.overweight),
            ("trading.underweight", self.trading.underweight),
            ("trading.no_action", self.trading.no_action),
            ("trading.tie", self.trading.tie),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        let v = &self.view;
        let t = &self.trading;
        for (name, sum) in [
            ("view", v.upgrade + v.downgrade + v.keep + v.missing),
            ("trading", t.overweight + t.underweight + t.no_action + t.tie),
        ] {
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("{name} rates sum to {sum}, expected 1"));
            }
        }
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for (_, class) in CLASSES {
            let words = self.lexicon.get(class).map(Vec::as_slice).unwrap_or(&[]);
            if words.is_empty() {
                return bad(format!("lexicon has no cue words for {class}"));
            }
            for w in words {
                if w.is_empty() || !w.chars().all(|c| c.is_alphanumeric()) {
                    return bad(format!("cue {w:?} must be a single alphanumeric word"));
                }
                if FILLER_WORDS.contains(&w.to_lowercase().as_str()) {
                    return bad(format!("cue {w:?} collides with a filler word"));
                }
                if let Some(other) = seen.insert(w.as_str(), class) {
                    return bad(format!("cue {w:?} used by both {other} and {class}"));
                }
            }
        }
        if let Some(extra) = self
            .lexicon
            .keys()
            .find(|k| !CLASSES.iter().any(|(_, c)| c == k))
        {
            return bad(format!("lexicon has unknown class {extra:?}"));
        }
        Ok(())
    }

    /// cue word -> class name.
    pub fn cue_table(&self) -> BTreeMap<String, String> {
        self.lexicon
            .iter()
            .flat_map(|(class, words)| words.iter().map(move |w| (w.to_lowercase(), class.clone())))
            .collect()
    }
}

/// Labels the rules must produce for one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub stock: StockId,
    pub anchor_day: TradingDay,
    pub timing_label: Option<TimingLabel>,
    pub view_label: Option<ViewLabel>,
    pub trading_label: Option<TradingLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trading_label_alias: Option<String>,
    #[serde(default)]
    pub exclusions: BTreeMap<Task, ExclusionReason>,
}

/// Generated files, held in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCorpus {
    pub calendar: String,
    pub news: String,
    pub reports: String,
    pub price_targets: String,
    pub trades: String,
    pub ground_truth: Vec<GroundTruth>,
}

impl SynthCorpus {
    pub fn ground_truth_jsonl(&self) -> String {
        let mut out = String::new();
        for g in &self.ground_truth {
            out.push_str(&serde_json::to_string(g).expect("ground truth serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes the five ingestion files and `ground_truth.jsonl` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(), SynthError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, body) in [
            (CALENDAR_FILE, &self.calendar),
            (NEWS_FILE, &self.news),
            (REPORTS_FILE, &self.reports),
            (PRICE_TARGETS_FILE, &self.price_targets),
            (TRADES_FILE, &self.trades),
        ] {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
        write_atomic(&dir.join(GROUND_TRUTH_FILE), self.ground_truth_jsonl().as_bytes())?;
        Ok(())
    }
}

#[derive(Serialize)]
struct NewsLine<'a> {
    id: &'a str,
    stock: &'a str,
    date: NaiveDate,
    headline: &'a str,
    body: &'a str,
}

#[derive(Serialize)]
struct ReportLine<'a> {
    stock: &'a str,
    date: NaiveDate,
    analyst_id: &'a str,
}

#[derive(Serialize)]
struct PriceTargetLine<'a> {
    stock: &'a str,
    date: NaiveDate,
    avg_price_target: Fixed4,
}

#[derive(Serialize)]
struct TradeLine<'a> {
    stock: &'a str,
    date: NaiveDate,
    institution_id: &'a str,
    buy_amount: Fixed4,
    sell_amount: Fixed4,
}

fn push_line<T: Serialize>(out: &mut String, value: &T) {
    out.push_str(&serde_json::to_string(value).expect("line serializes"));
    out.push('\n');
}

fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut days = Vec::with_capacity(n);
    let mut d = start;
    while days.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            days.push(d);
        }
        d += Duration::days(1);
    }
    days
}

#[derive(Clone, Copy)]
enum ViewDraw {
    Up,
    Down,
    Keep,
    Missing,
}

#[derive(Clone, Copy)]
enum FlowDraw {
    Buy,
    Sell,
    None,
    Tie,
}

struct Gen<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }

    fn view_draw(&mut self) -> ViewDraw {
        let v = &self.spec.view;
        let x: f64 = self.rng.gen();
        if x < v.upgrade {
            ViewDraw::Up
        } else if x < v.upgrade + v.downgrade {
            ViewDraw::Down
        } else if x < v.upgrade + v.downgrade + v.keep {
            ViewDraw::Keep
        } else {
            ViewDraw::Missing
        }
    }

    fn flow_draw(&mut self) -> FlowDraw {
        let t = &self.spec.trading;
        let x: f64 = self.rng.gen();
        if x < t.overweight {
            FlowDraw::Buy
        } else if x < t.overweight + t.underweight {
            FlowDraw::Sell
        } else if x < t.overweight + t.underweight + t.no_action {
            FlowDraw::None
        } else {
            FlowDraw::Tie
        }
    }

    fn amount(&mut self) -> i64 {
        self.rng.gen_range(0..=self.spec.max_trade_amount.raw())
    }

    /// Trade rows `(institution, buy, sell)` whose totals realize `flow`.
    fn trades(&mut self, flow: FlowDraw) -> Vec<(String, Fixed4, Fixed4)> {
        if matches!(flow, FlowDraw::None) {
            return Vec::new();
        }
        let k = self.rng.gen_range(1..=self.spec.max_trades_per_day);
        let mut institutions: Vec<usize> = (1..=20).collect();
        institutions.shuffle(&mut self.rng);
        let mut rows: Vec<(String, i64, i64)> = institutions[..k.min(20)]
            .iter()
            .map(|i| (format!("INST{i:02}"), 0, 0))
            .collect();
        rows.sort();
        for row in rows.iter_mut() {
            row.1 = self.amount();
            row.2 = self.amount();
        }
        let buys: i64 = rows.iter().map(|r| r.1).sum();
        let sells: i64 = rows.iter().map(|r| r.2).sum();
        let diff = buys - sells;
        match flow {
            FlowDraw::Buy if diff <= 0 => rows[0].1 += -diff + self.rng.gen_range(1..=10_000),
            FlowDraw::Sell if diff >= 0 => rows[0].2 += diff + self.rng.gen_range(1..=10_000),
            FlowDraw::Tie if diff > 0 => rows[0].2 += diff,
            FlowDraw::Tie if diff < 0 => rows[0].1 += -diff,
            _ => {}
        }
        rows.into_iter()
            .map(|(i, b, s)| (i, Fixed4::from_raw(b), Fixed4::from_raw(s)))
            .collect()
    }

    fn cue(&mut self, task: Task, class: &str) -> String {
        let class = if self.chance(self.spec.cue_fidelity) {
            class.to_string()
        } else {
            let others: Vec<&str> = task.classes().iter().copied().filter(|c| *c != class).collect();
            others[self.rng.gen_range(0..others.len())].to_string()
        };
        let words = &self.spec.lexicon[&class];
        words[self.rng.gen_range(0..words.len())].clone()
    }

    fn filler(&mut self) -> Vec<String> {
        (0..self.spec.filler_words_per_item)
            .map(|_| FILLER_WORDS[self.rng.gen_range(0..FILLER_WORDS.len())].to_string())
            .collect()
    }
}

/// Generates a corpus from `spec`. Output is a pure function of the spec.
pub fn generate_stream(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let dates = weekdays(spec.start_date, spec.n_days);
    let mut g = Gen {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };
    let mut out = SynthCorpus {
        calendar: dates.iter().map(|d| format!("{d}\n")).collect(),
        news: String::new(),
        reports: String::new(),
        price_targets: String::new(),
        trades: String::new(),
        ground_truth: Vec::new(),
    };
    let last = spec.n_days - 1;

    for s in 0..spec.n_stocks {
        let code = format!("{}", 1101 + s);
        let stock = StockId::new(&code).expect("numeric code");
        let has_news: Vec<bool> = (0..spec.n_days).map(|_| g.chance(spec.news_rate)).collect();
        let mut level: Option<i64> = Some(g.rng.gen_range(500_000..=2_000_000));
        if let Some(p) = level {
            push_line(
                &mut out.price_targets,
                &PriceTargetLine {
                    stock: &code,
                    date: dates[0],
                    avg_price_target: Fixed4::from_raw(p),
                },
            );
        }

        for d in 0..spec.n_days {
            let day = TradingDay {
                ordinal: d as u32,
                date: dates[d],
            };
            let mut truth = GroundTruth {
                stock: stock.clone(),
                anchor_day: day,
                timing_label: None,
                view_label: None,
                trading_label: None,
                trading_label_alias: None,
                exclusions: BTreeMap::new(),
            };
            let mut cues: Vec<String> = Vec::new();

            if d < last {
                let next = dates[d + 1];
                // timing
                let report = if has_news[d] {
                    g.chance(spec.report_prob)
                } else {
                    g.chance(spec.background_report_prob)
                };
                if report {
                    let n = g.rng.gen_range(1..=3);
                    let mut analysts: BTreeSet<String> = BTreeSet::new();
                    while analysts.len() < n {
                        analysts.insert(format!("AN{:02}", g.rng.gen_range(1..=30)));
                    }
                    for a in &analysts {
                        push_line(
                            &mut out.reports,
                            &ReportLine {
                                stock: &code,
                                date: next,
                                analyst_id: a,
                            },
                        );
                    }
                }
                let timing = if report {
                    TimingLabel::ReleaseReport
                } else {
                    TimingLabel::NotReleaseReport
                };
                truth.timing_label = Some(timing);

                // view
                let draw = g.view_draw();
                let base = match level {
                    Some(p) => p,
                    None => g.rng.gen_range(500_000..=2_000_000),
                };
                let next_level = match draw {
                    ViewDraw::Up => Some(base + g.rng.gen_range(100..=50_000)),
                    ViewDraw::Down => Some(base - g.rng.gen_range(100..=50_000).min(base / 2)),
                    ViewDraw::Keep => Some(base),
                    ViewDraw::Missing => None,
                };
                match (level, next_level, draw) {
                    (Some(_), Some(_), ViewDraw::Up) => truth.view_label = Some(ViewLabel::Upgrade),
                    (Some(_), Some(_), ViewDraw::Down) => truth.view_label = Some(ViewLabel::Downgrade),
                    (Some(_), Some(_), ViewDraw::Keep) => truth.view_label = Some(ViewLabel::Keep),
                    _ => {
                        truth.exclusions.insert(Task::View, ExclusionReason::MissingPt);
                    }
                }
                if let Some(p) = next_level {
                    push_line(
                        &mut out.price_targets,
                        &PriceTargetLine {
                            stock: &code,
                            date: next,
                            avg_price_target: Fixed4::from_raw(p),
                        },
                    );
                }
                level = next_level;

                // trading
                let flow = if has_news[d] {
                    g.flow_draw()
                } else if g.chance(spec.background_trade_prob) {
                    if g.chance(0.5) {
                        FlowDraw::Buy
                    } else {
                        FlowDraw::Sell
                    }
                } else {
                    FlowDraw::None
                };
                for (inst, buy, sell) in g.trades(flow) {
                    push_line(
                        &mut out.trades,
                        &TradeLine {
                            stock: &code,
                            date: next,
                            institution_id: &inst,
                            buy_amount: buy,
                            sell_amount: sell,
                        },
                    );
                }
                match flow {
                    FlowDraw::Buy => truth.trading_label = Some(TradingLabel::Overweight),
                    FlowDraw::Sell => truth.trading_label = Some(TradingLabel::Underweight),
                    FlowDraw::None => truth.trading_label = Some(TradingLabel::NoAction),
                    FlowDraw::Tie => {
                        truth.exclusions.insert(Task::Trading, ExclusionReason::Tie);
                    }
                }
                truth.trading_label_alias = truth.trading_label.map(|l| l.alias().to_string());

                if has_news[d] {
                    cues.push(g.cue(Task::Timing, timing.as_str()));
                    if let Some(v) = truth.view_label {
                        cues.push(g.cue(Task::View, v.as_str()));
                    }
                    if let Some(t) = truth.trading_label {
                        cues.push(g.cue(Task::Trading, t.as_str()));
                    }
                }
            } else {
                for task in Task::ALL {
                    truth.exclusions.insert(task, ExclusionReason::NoNextDay);
                }
            }

            if !has_news[d] {
                continue;
            }
            let items = 1 + usize::from(g.chance(spec.extra_news_rate));
            let after_gap = d > 0 && dates[d] - dates[d - 1] > Duration::days(1);
            for k in 0..items {
                let mut body = g.filler();
                let mut headline = format!("{code} company update {k}");
                if k == 0 {
                    match spec.cue_placement {
                        CuePlacement::Body => {
                            for cue in &cues {
                                let at = g.rng.gen_range(0..=body.len());
                                body.insert(at, cue.clone());
                            }
                        }
                        CuePlacement::Headline => {
                            for cue in &cues {
                                write!(headline, " {cue}").expect("string write");
                            }
                        }
                    }
                }
                let date = if after_gap && g.chance(spec.weekend_news_rate) {
                    dates[d] - Duration::days(1)
                } else {
                    dates[d]
                };
                let id = format!("N{code}-{d:04}-{k}");
                push_line(
                    &mut out.news,
                    &NewsLine {
                        id: &id,
                        stock: &code,
                        date,
                        headline: &headline,
                        body: &body.join(" "),
                    },
                );
            }
            out.ground_truth.push(truth);
        }
    }
    Ok(out)
}
