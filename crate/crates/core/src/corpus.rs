//! The validated, merged corpus and its lookup helpers.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{
    NewsItem, PriceTargetSnapshot, ReportEvent, StockId, TradeRecord, TradingCalendar,
};
use crate::ingest::{
    load_calendar, load_stream, IngestError, Stream, StreamKind, ValidationReport, CALENDAR_FILE,
};

/// All four streams, each sorted by (stock, day), plus the calendar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub calendar: TradingCalendar,
    pub news: Vec<NewsItem>,
    pub reports: Vec<ReportEvent>,
    pub price_targets: Vec<PriceTargetSnapshot>,
    pub trades: Vec<TradeRecord>,
    /// Stocks that appear in news; negatives are drawn from this pool.
    pub stock_pool: BTreeSet<StockId>,
}

#[derive(Serialize)]
struct CanonicalCorpus<'a> {
    calendar: &'a [NaiveDate],
    news: &'a [NewsItem],
    reports: &'a [ReportEvent],
    price_targets: &'a [PriceTargetSnapshot],
    trades: &'a [TradeRecord],
    stock_pool: &'a BTreeSet<StockId>,
}

fn stock_day_range<'a, T>(
    items: &'a [T],
    key: impl Fn(&T) -> (&StockId, u32),
    stock: &StockId,
    lo: u32,
    hi: u32,
) -> &'a [T] {
    let start = items.partition_point(|x| key(x) < (stock, lo));
    let end = items.partition_point(|x| key(x) <= (stock, hi));
    &items[start..end.max(start)]
}

impl Corpus {
    /// News for `stock` with day ordinal in `lo..=hi`, sorted by (day, id).
    pub fn news_for(&self, stock: &StockId, lo: u32, hi: u32) -> &[NewsItem] {
        stock_day_range(&self.news, |n| (&n.stock, n.day.ordinal), stock, lo, hi)
    }

    pub fn reports_on(&self, stock: &StockId, ordinal: u32) -> &[ReportEvent] {
        stock_day_range(&self.reports, |r| (&r.stock, r.day.ordinal), stock, ordinal, ordinal)
    }

    pub fn price_target_on(&self, stock: &StockId, ordinal: u32) -> Option<&PriceTargetSnapshot> {
        stock_day_range(
            &self.price_targets,
            |p| (&p.stock, p.day.ordinal),
            stock,
            ordinal,
            ordinal,
        )
        .first()
    }

    pub fn trades_on(&self, stock: &StockId, ordinal: u32) -> &[TradeRecord] {
        stock_day_range(&self.trades, |t| (&t.stock, t.day.ordinal), stock, ordinal, ordinal)
    }

    /// Byte-stable JSON rendering of the whole corpus.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&CanonicalCorpus {
            calendar: self.calendar.dates(),
            news: &self.news,
            reports: &self.reports,
            price_targets: &self.price_targets,
            trades: &self.trades,
            stock_pool: &self.stock_pool,
        })
        .expect("corpus serializes")
    }
}

/// Merges validated streams into a corpus. Input order does not matter.
pub fn build_corpus(streams: Vec<Stream>, calendar: TradingCalendar) -> Corpus {
    let mut corpus = Corpus {
        calendar,
        news: Vec::new(),
        reports: Vec::new(),
        price_targets: Vec::new(),
        trades: Vec::new(),
        stock_pool: BTreeSet::new(),
    };
    for stream in streams {
        match stream {
            Stream::News(v) => corpus.news.extend(v),
            Stream::Reports(v) => corpus.reports.extend(v),
            Stream::PriceTargets(v) => corpus.price_targets.extend(v),
            Stream::Trades(v) => corpus.trades.extend(v),
        }
    }
    corpus
        .news
        .sort_by(|a, b| (&a.stock, a.day.ordinal, &a.id).cmp(&(&b.stock, b.day.ordinal, &b.id)));
    corpus.reports.sort_by(|a, b| {
        (&a.stock, a.day.ordinal, &a.analyst_id).cmp(&(&b.stock, b.day.ordinal, &b.analyst_id))
    });
    corpus.reports.dedup();
    corpus
        .price_targets
        .sort_by(|a, b| (&a.stock, a.day.ordinal).cmp(&(&b.stock, b.day.ordinal)));
    corpus.trades.sort_by(|a, b| {
        (&a.stock, a.day.ordinal, &a.institution_id, a.buy_amount, a.sell_amount).cmp(&(
            &b.stock,
            b.day.ordinal,
            &b.institution_id,
            b.buy_amount,
            b.sell_amount,
        ))
    });
    corpus.stock_pool = corpus.news.iter().map(|n| n.stock.clone()).collect();
    corpus
}

/// Loads `dir/{calendar.txt,news.jsonl,...}`. Missing stream files count as
/// empty streams and produce a warning. Streams are parsed in parallel on
/// the current rayon pool.
pub fn load_corpus(
    dir: impl AsRef<Path>,
    calendar_path: Option<&Path>,
) -> Result<(Corpus, ValidationReport), IngestError> {
    let dir = dir.as_ref();
    let calendar_path: PathBuf = calendar_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(CALENDAR_FILE));
    let calendar = load_calendar(&calendar_path)?;

    let results: Vec<Result<Option<(Stream, ValidationReport)>, IngestError>> = StreamKind::ALL
        .par_iter()
        .map(|&kind| {
            let path = dir.join(kind.file_name());
            if !path.exists() {
                return Ok(None);
            }
            load_stream(&path, kind, &calendar).map(Some)
        })
        .collect();

    let mut report = ValidationReport::default();
    let mut streams = Vec::new();
    for (kind, result) in StreamKind::ALL.iter().zip(results) {
        match result? {
            Some((stream, r)) => {
                report.merge(r);
                streams.push(stream);
            }
            None => {
                report.warnings.push(crate::ingest::Issue {
                    file: kind.file_name().to_string(),
                    line: 0,
                    code: "MISSING_FILE".into(),
                    message: format!("{} not found; treated as empty", kind.file_name()),
                });
                report.counts.insert(kind.as_str().to_string(), 0);
            }
        }
    }
    report.counts.insert("calendar_days".into(), calendar.len());
    if !report.is_accepted() {
        return Err(IngestError::Rejected(report));
    }
    Ok((build_corpus(streams, calendar), report))
}
