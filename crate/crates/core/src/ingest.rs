//! Parsing and validation of the event streams and the trading calendar.
//!
//! Every stream is JSON Lines. Record-level problems are collected into a
//! [`ValidationReport`] instead of aborting at the first bad line; the corpus
//! is accepted only when the report has no errors.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::domain::{
    CalendarError, Fixed4, NewsItem, PriceTargetSnapshot, ReportEvent, StockId, TradeRecord,
    TradingCalendar, TradingDay,
};

pub const NEWS_FILE: &str = "news.jsonl";
pub const REPORTS_FILE: &str = "reports.jsonl";
pub const PRICE_TARGETS_FILE: &str = "price_targets.jsonl";
pub const TRADES_FILE: &str = "trades.jsonl";
pub const CALENDAR_FILE: &str = "calendar.txt";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Order {
        path: PathBuf,
        #[source]
        source: CalendarError,
    },
    #[error("corpus rejected with {} error(s)", .0.errors.len())]
    Rejected(ValidationReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    News,
    Reports,
    PriceTargets,
    Trades,
}

impl StreamKind {
    pub const ALL: [StreamKind; 4] = [
        StreamKind::News,
        StreamKind::Reports,
        StreamKind::PriceTargets,
        StreamKind::Trades,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            StreamKind::News => NEWS_FILE,
            StreamKind::Reports => REPORTS_FILE,
            StreamKind::PriceTargets => PRICE_TARGETS_FILE,
            StreamKind::Trades => TRADES_FILE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StreamKind::News => "news",
            StreamKind::Reports => "reports",
            StreamKind::PriceTargets => "price_targets",
            StreamKind::Trades => "trades",
        }
    }
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub file: String,
    pub line: usize,
    pub code: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: [{}] {}", self.file, self.line, self.code, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    pub counts: BTreeMap<String, usize>,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.errors.extend(other.errors);
        self.warnings.extend(other.warnings);
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
    }

    fn error(&mut self, file: &str, line: usize, code: &str, message: impl Into<String>) {
        self.errors.push(Issue {
            file: file.to_string(),
            line,
            code: code.to_string(),
            message: message.into(),
        });
    }

    fn warning(&mut self, file: &str, line: usize, code: &str, message: impl Into<String>) {
        self.warnings.push(Issue {
            file: file.to_string(),
            line,
            code: code.to_string(),
            message: message.into(),
        });
    }
}

/// Validated records of one stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stream {
    News(Vec<NewsItem>),
    Reports(Vec<ReportEvent>),
    PriceTargets(Vec<PriceTargetSnapshot>),
    Trades(Vec<TradeRecord>),
}

impl Stream {
    pub fn kind(&self) -> StreamKind {
        match self {
            Stream::News(_) => StreamKind::News,
            Stream::Reports(_) => StreamKind::Reports,
            Stream::PriceTargets(_) => StreamKind::PriceTargets,
            Stream::Trades(_) => StreamKind::Trades,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Stream::News(v) => v.len(),
            Stream::Reports(v) => v.len(),
            Stream::PriceTargets(v) => v.len(),
            Stream::Trades(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn empty(kind: StreamKind) -> Stream {
        match kind {
            StreamKind::News => Stream::News(Vec::new()),
            StreamKind::Reports => Stream::Reports(Vec::new()),
            StreamKind::PriceTargets => Stream::PriceTargets(Vec::new()),
            StreamKind::Trades => Stream::Trades(Vec::new()),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a calendar file: one ISO date per line, strictly ascending.
pub fn load_calendar(path: impl AsRef<Path>) -> Result<TradingCalendar, IngestError> {
    let path = path.as_ref();
    parse_calendar(path, &read_to_string(path)?)
}

pub fn parse_calendar(path: &Path, text: &str) -> Result<TradingCalendar, IngestError> {
    let mut days = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim().trim_start_matches('\u{feff}');
        if line.is_empty() {
            continue;
        }
        let date = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| IngestError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("bad date {line:?}: {e}"),
        })?;
        days.push(date);
    }
    if days.is_empty() {
        return Err(IngestError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "calendar has no dates".into(),
        });
    }
    TradingCalendar::new(days).map_err(|source| IngestError::Order {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
struct RawNews {
    id: String,
    stock: OneOrMany,
    date: String,
    #[serde(default)]
    headline: String,
    body: String,
}

#[derive(Deserialize)]
struct RawReport {
    stock: String,
    date: String,
    analyst_id: String,
}

#[derive(Deserialize)]
struct RawPriceTarget {
    stock: String,
    date: String,
    avg_price_target: String,
}

#[derive(Deserialize)]
struct RawTrade {
    stock: String,
    date: String,
    institution_id: String,
    buy_amount: String,
    sell_amount: String,
}

fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// Per-line context shared by the record parsers.
struct LineCtx<'a> {
    file: &'a str,
    line: usize,
    calendar: &'a TradingCalendar,
}

impl LineCtx<'_> {
    fn stock(&self, raw: &str, report: &mut ValidationReport) -> Option<StockId> {
        match StockId::new(raw) {
            Ok(s) => Some(s),
            Err(e) => {
                report.error(self.file, self.line, "BAD_STOCK", e.to_string());
                None
            }
        }
    }

    fn date(&self, raw: &str, report: &mut ValidationReport) -> Option<NaiveDate> {
        match NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d") {
            Ok(d) => Some(d),
            Err(e) => {
                report.error(self.file, self.line, "BAD_DATE", format!("{raw:?}: {e}"));
                None
            }
        }
    }

    fn decimal(&self, field: &str, raw: &str, report: &mut ValidationReport) -> Option<Fixed4> {
        match raw.parse::<Fixed4>() {
            Ok(v) => Some(v),
            Err(e) => {
                report.error(self.file, self.line, "BAD_DECIMAL", format!("{field}: {e}"));
                None
            }
        }
    }

    /// Exact trading day, or an error for the non-news streams.
    fn exact_day(&self, date: NaiveDate, report: &mut ValidationReport) -> Option<TradingDay> {
        let day = self.calendar.lookup(date);
        if day.is_none() {
            report.error(
                self.file,
                self.line,
                "NOT_TRADING_DAY",
                format!("{date} is not a trading day"),
            );
        }
        day
    }

    /// News published on a closed day moves to the next session.
    fn news_day(&self, date: NaiveDate, report: &mut ValidationReport) -> Option<TradingDay> {
        if let Some(day) = self.calendar.lookup(date) {
            return Some(day);
        }
        let first = self.calendar.first().date;
        match self.calendar.on_or_after(date) {
            Some(day) if date > first => {
                report.warning(
                    self.file,
                    self.line,
                    "SHIFTED",
                    format!("{date} is not a trading day; shifted to {}", day.date),
                );
                Some(day)
            }
            _ => {
                report.error(
                    self.file,
                    self.line,
                    "OUT_OF_CALENDAR",
                    format!("{date} lies outside the calendar"),
                );
                None
            }
        }
    }
}

/// Loads and validates one stream file.
pub fn load_stream(
    path: impl AsRef<Path>,
    kind: StreamKind,
    calendar: &TradingCalendar,
) -> Result<(Stream, ValidationReport), IngestError> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(parse_stream(&name, &text, kind, calendar))
}

/// Parses stream text. Records with errors are dropped and reported.
pub fn parse_stream(
    file: &str,
    text: &str,
    kind: StreamKind,
    calendar: &TradingCalendar,
) -> (Stream, ValidationReport) {
    let mut report = ValidationReport::default();
    let mut stream = Stream::empty(kind);
    let mut news_ids: HashSet<String> = HashSet::new();
    let mut pt_seen: HashMap<(StockId, u32), usize> = HashMap::new();
    let mut report_seen: HashSet<(StockId, u32, String)> = HashSet::new();

    for (i, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim().trim_start_matches('\u{feff}');
        if line.is_empty() {
            continue;
        }
        let ctx = LineCtx {
            file,
            line: i + 1,
            calendar,
        };
        let malformed = |report: &mut ValidationReport, e: serde_json::Error| {
            report.error(file, i + 1, "PARSE", e.to_string());
        };
        match &mut stream {
            Stream::News(out) => {
                let raw: RawNews = match serde_json::from_str(line) {
                    Ok(r) => r,
                    Err(e) => {
                        malformed(&mut report, e);
                        continue;
                    }
                };
                let body = nfc(&raw.body);
                if body.trim().is_empty() {
                    report.error(file, ctx.line, "EMPTY_BODY", format!("news {:?} has empty body", raw.id));
                    continue;
                }
                let raw_stocks = match raw.stock {
                    OneOrMany::One(s) => vec![s],
                    OneOrMany::Many(v) => v,
                };
                if raw_stocks.is_empty() {
                    report.error(file, ctx.line, "BAD_STOCK", "news without stock");
                    continue;
                }
                let mut stocks = BTreeSet::new();
                let mut bad_stock = false;
                for s in &raw_stocks {
                    match ctx.stock(s, &mut report) {
                        Some(stock) => {
                            stocks.insert(stock);
                        }
                        None => bad_stock = true,
                    }
                }
                if bad_stock {
                    continue;
                }
                let Some(date) = ctx.date(&raw.date, &mut report) else { continue };
                let Some(day) = ctx.news_day(date, &mut report) else { continue };
                let id = nfc(raw.id.trim());
                let headline = nfc(&raw.headline);
                let multi = stocks.len() > 1;
                for stock in stocks {
                    let copy_id = if multi { format!("{id}#{stock}") } else { id.clone() };
                    if !news_ids.insert(copy_id.clone()) {
                        report.error(file, ctx.line, "DUP_ID", format!("duplicate news id {copy_id:?}"));
                        continue;
                    }
                    out.push(NewsItem {
                        id: copy_id,
                        stock,
                        day,
                        headline: headline.clone(),
                        body: body.clone(),
                    });
                }
            }
            Stream::Reports(out) => {
                let raw: RawReport = match serde_json::from_str(line) {
                    Ok(r) => r,
                    Err(e) => {
                        malformed(&mut report, e);
                        continue;
                    }
                };
                let Some(stock) = ctx.stock(&raw.stock, &mut report) else { continue };
                let Some(date) = ctx.date(&raw.date, &mut report) else { continue };
                let Some(day) = ctx.exact_day(date, &mut report) else { continue };
                let analyst_id = nfc(raw.analyst_id.trim());
                if !report_seen.insert((stock.clone(), day.ordinal, analyst_id.clone())) {
                    report.warning(
                        file,
                        ctx.line,
                        "DUP_REPORT",
                        format!("duplicate report ({stock}, {date}, {analyst_id}) collapsed"),
                    );
                    continue;
                }
                out.push(ReportEvent {
                    stock,
                    day,
                    analyst_id,
                });
            }
            Stream::PriceTargets(out) => {
                let raw: RawPriceTarget = match serde_json::from_str(line) {
                    Ok(r) => r,
                    Err(e) => {
                        malformed(&mut report, e);
                        continue;
                    }
                };
                let Some(stock) = ctx.stock(&raw.stock, &mut report) else { continue };
                let Some(date) = ctx.date(&raw.date, &mut report) else { continue };
                let Some(target) = ctx.decimal("avg_price_target", &raw.avg_price_target, &mut report) else {
                    continue;
                };
                if !target.is_positive() {
                    report.error(file, ctx.line, "NON_POSITIVE_PT", format!("avg_price_target {target} must be > 0"));
                    continue;
                }
                let Some(day) = ctx.exact_day(date, &mut report) else { continue };
                if let Some(first_line) = pt_seen.insert((stock.clone(), day.ordinal), ctx.line) {
                    report.error(
                        file,
                        ctx.line,
                        "DUP_PT",
                        format!("second price target for ({stock}, {date}); first on line {first_line}"),
                    );
                    continue;
                }
                out.push(PriceTargetSnapshot {
                    stock,
                    day,
                    avg_price_target: target,
                });
            }
            Stream::Trades(out) => {
                let raw: RawTrade = match serde_json::from_str(line) {
                    Ok(r) => r,
                    Err(e) => {
                        malformed(&mut report, e);
                        continue;
                    }
                };
                let Some(stock) = ctx.stock(&raw.stock, &mut report) else { continue };
                let Some(date) = ctx.date(&raw.date, &mut report) else { continue };
                let buy = ctx.decimal("buy_amount", &raw.buy_amount, &mut report);
                let sell = ctx.decimal("sell_amount", &raw.sell_amount, &mut report);
                let (Some(buy_amount), Some(sell_amount)) = (buy, sell) else { continue };
                if buy_amount.is_negative() || sell_amount.is_negative() {
                    report.error(file, ctx.line, "NEGATIVE_AMOUNT", "trade amounts must be non-negative");
                    continue;
                }
                let Some(day) = ctx.exact_day(date, &mut report) else { continue };
                out.push(TradeRecord {
                    stock,
                    day,
                    institution_id: nfc(raw.institution_id.trim()),
                    buy_amount,
                    sell_amount,
                });
            }
        }
    }

    sort_stream(&mut stream);
    report.counts.insert(kind.as_str().to_string(), stream.len());
    (stream, report)
}

fn sort_stream(stream: &mut Stream) {
    match stream {
        Stream::News(v) => v.sort_by(|a, b| {
            (&a.stock, a.day.ordinal, &a.id).cmp(&(&b.stock, b.day.ordinal, &b.id))
        }),
        Stream::Reports(v) => v.sort_by(|a, b| {
            (&a.stock, a.day.ordinal, &a.analyst_id).cmp(&(&b.stock, b.day.ordinal, &b.analyst_id))
        }),
        Stream::PriceTargets(v) => v.sort_by(|a, b| (&a.stock, a.day.ordinal).cmp(&(&b.stock, b.day.ordinal))),
        Stream::Trades(v) => v.sort_by(|a, b| {
            (&a.stock, a.day.ordinal, &a.institution_id, a.buy_amount, a.sell_amount).cmp(&(
                &b.stock,
                b.day.ordinal,
                &b.institution_id,
                b.buy_amount,
                b.sell_amount,
            ))
        }),
    }
}
