//! Shared data types for events, instances and labels.

mod calendar;
mod decimal;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calendar::{next_trading_day, CalendarError, TradingCalendar, TradingDay};
pub use decimal::{DecimalError, Fixed4};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("stock code is empty")]
    EmptyStock,
    #[error("stock code {0:?} is not alphanumeric")]
    InvalidStock(String),
    #[error("unknown task {0:?} (expected timing, view or trading)")]
    UnknownTask(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

/// Exchange ticker, trimmed and upper-cased.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StockId(String);

impl StockId {
    pub fn new(raw: &str) -> Result<Self, DomainError> {
        let code = raw.trim().to_uppercase();
        if code.is_empty() {
            return Err(DomainError::EmptyStock);
        }
        if !code.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(DomainError::InvalidStock(raw.to_string()));
        }
        Ok(StockId(code))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for StockId {
    type Error = DomainError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        StockId::new(&value)
    }
}

impl From<StockId> for String {
    fn from(value: StockId) -> Self {
        value.0
    }
}

impl fmt::Display for StockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NewsItem {
    pub id: String,
    pub stock: StockId,
    pub day: TradingDay,
    pub headline: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReportEvent {
    pub stock: StockId,
    pub day: TradingDay,
    pub analyst_id: String,
}

impl ReportEvent {
    pub fn key(&self) -> String {
        format!("report:{}:{}:{}", self.stock, self.day.date, self.analyst_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PriceTargetSnapshot {
    pub stock: StockId,
    pub day: TradingDay,
    pub avg_price_target: Fixed4,
}

impl PriceTargetSnapshot {
    pub fn key(&self) -> String {
        format!("pt:{}:{}", self.stock, self.day.date)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TradeRecord {
    pub stock: StockId,
    pub day: TradingDay,
    pub institution_id: String,
    pub buy_amount: Fixed4,
    pub sell_amount: Fixed4,
}

impl TradeRecord {
    pub fn key(&self) -> String {
        format!(
            "trade:{}:{}:{}",
            self.stock, self.day.date, self.institution_id
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Timing,
    View,
    Trading,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Timing, Task::View, Task::Trading];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Timing => "timing",
            Task::View => "view",
            Task::Trading => "trading",
        }
    }

    /// Class names of the task in canonical order.
    pub fn classes(self) -> &'static [&'static str] {
        match self {
            Task::Timing => &["ReleaseReport", "NotReleaseReport"],
            Task::View => &["Upgrade", "Downgrade", "Keep"],
            Task::Trading => &["Overweight", "Underweight", "NoAction"],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "timing" => Ok(Task::Timing),
            "view" => Ok(Task::View),
            "trading" => Ok(Task::Trading),
            _ => Err(DomainError::UnknownTask(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimingLabel {
    ReleaseReport,
    NotReleaseReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewLabel {
    Upgrade,
    Downgrade,
    Keep,
}

/// Net institutional flow on the outcome day. Also spelled Overbuy / Oversell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TradingLabel {
    #[serde(alias = "Overbuy")]
    Overweight,
    #[serde(alias = "Oversell")]
    Underweight,
    NoAction,
}

impl TimingLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TimingLabel::ReleaseReport => "ReleaseReport",
            TimingLabel::NotReleaseReport => "NotReleaseReport",
        }
    }
}

impl ViewLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewLabel::Upgrade => "Upgrade",
            ViewLabel::Downgrade => "Downgrade",
            ViewLabel::Keep => "Keep",
        }
    }
}

impl TradingLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TradingLabel::Overweight => "Overweight",
            TradingLabel::Underweight => "Underweight",
            TradingLabel::NoAction => "NoAction",
        }
    }

    /// Alternate spelling used in dataset statistics tables.
    pub fn alias(self) -> &'static str {
        match self {
            TradingLabel::Overweight => "Overbuy",
            TradingLabel::Underweight => "Oversell",
            TradingLabel::NoAction => "NoAction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExclusionReason {
    /// Anchor day is the final calendar day.
    NoNextDay,
    /// Price-target snapshot absent on t or t+1.
    MissingPt,
    /// Buy and sell totals equal with at least one trade record.
    Tie,
}

impl ExclusionReason {
    pub fn code(self) -> &'static str {
        match self {
            ExclusionReason::NoNextDay => "NO_NEXT_DAY",
            ExclusionReason::MissingPt => "MISSING_PT",
            ExclusionReason::Tie => "TIE",
        }
    }
}

/// Result of applying one labeling rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome<L> {
    Labeled(L),
    Excluded(ExclusionReason),
}

impl<L: Copy> Outcome<L> {
    pub fn label(&self) -> Option<L> {
        match self {
            Outcome::Labeled(l) => Some(*l),
            Outcome::Excluded(_) => None,
        }
    }
}

/// Which rule produced a label; recorded for audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ReportOnNextDay,
    NoReportOnNextDay,
    PriceTargetUp,
    PriceTargetDown,
    PriceTargetFlat,
    PriceTargetMissing,
    NetBuying,
    NetSelling,
    NoTrades,
    BuySellTie,
    NoNextDay,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelProvenance {
    pub instance: String,
    pub task: Task,
    pub rule: Rule,
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    #[serde(rename = "T")]
    pub lookback: u32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { lookback: 5 }
    }
}

/// A (stock, anchor day) pair with its news window and up to three labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub stock: StockId,
    pub anchor_day: TradingDay,
    pub window: Vec<NewsItem>,
    pub timing_label: Option<TimingLabel>,
    pub view_label: Option<ViewLabel>,
    pub trading_label: Option<TradingLabel>,
    #[serde(default)]
    pub exclusions: BTreeMap<Task, ExclusionReason>,
    #[serde(default)]
    pub provenance: Vec<LabelProvenance>,
}

impl Instance {
    pub fn new(stock: StockId, anchor_day: TradingDay, window: Vec<NewsItem>) -> Self {
        Instance {
            stock,
            anchor_day,
            window,
            timing_label: None,
            view_label: None,
            trading_label: None,
            exclusions: BTreeMap::new(),
            provenance: Vec::new(),
        }
    }

    /// Stable identifier, `STOCK@YYYY-MM-DD`.
    pub fn key(&self) -> String {
        format!("{}@{}", self.stock, self.anchor_day.date)
    }

    /// Label of `task` as its class name, if labeled.
    pub fn class_name(&self, task: Task) -> Option<&'static str> {
        match task {
            Task::Timing => self.timing_label.map(TimingLabel::as_str),
            Task::View => self.view_label.map(ViewLabel::as_str),
            Task::Trading => self.trading_label.map(TradingLabel::as_str),
        }
    }

    pub fn is_excluded(&self, task: Task) -> bool {
        self.exclusions.contains_key(&task)
    }

    /// Excludes every task, clearing labels.
    pub fn exclude_all(&mut self, reason: ExclusionReason) {
        self.timing_label = None;
        self.view_label = None;
        self.trading_label = None;
        for task in Task::ALL {
            self.exclusions.insert(task, reason);
        }
    }

    pub fn set_timing(&mut self, outcome: Outcome<TimingLabel>) {
        self.timing_label = outcome.label();
        self.record_exclusion(Task::Timing, outcome_reason(&outcome));
    }

    pub fn set_view(&mut self, outcome: Outcome<ViewLabel>) {
        self.view_label = outcome.label();
        self.record_exclusion(Task::View, outcome_reason(&outcome));
    }

    pub fn set_trading(&mut self, outcome: Outcome<TradingLabel>) {
        self.trading_label = outcome.label();
        self.record_exclusion(Task::Trading, outcome_reason(&outcome));
    }

    fn record_exclusion(&mut self, task: Task, reason: Option<ExclusionReason>) {
        match reason {
            Some(r) => self.exclusions.insert(task, r),
            None => self.exclusions.remove(&task),
        };
    }

    /// Window sorted, single-stock, and containing the anchor day.
    pub fn window_is_well_formed(&self) -> bool {
        !self.window.is_empty()
            && self.window.iter().all(|n| n.stock == self.stock)
            && self.window.iter().any(|n| n.day == self.anchor_day)
            && self
                .window
                .windows(2)
                .all(|w| (w[0].day.ordinal, &w[0].id) <= (w[1].day.ordinal, &w[1].id))
    }
}

fn outcome_reason<L>(outcome: &Outcome<L>) -> Option<ExclusionReason> {
    match outcome {
        Outcome::Excluded(r) => Some(*r),
        Outcome::Labeled(_) => None,
    }
}
