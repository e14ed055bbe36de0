//! Brute-force labeling oracle over raw corpus files.
//!
//! Deliberately shares no code with the library: it reads the JSONL files as
//! untyped JSON, compares ISO date strings, and parses decimals by hand.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRow {
    pub window: Vec<String>,
    /// `Ok(class)` or `Err(exclusion code)`.
    pub timing: Result<String, String>,
    pub view: Result<String, String>,
    pub trading: Result<String, String>,
}

fn lines(dir: &Path, name: &str) -> Vec<Value> {
    let text = std::fs::read_to_string(dir.join(name)).unwrap_or_default();
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("oracle: bad json"))
        .collect()
}

fn s(v: &Value, k: &str) -> String {
    v[k].as_str().expect("oracle: missing string").to_string()
}

/// Decimal string to ten-thousandths.
pub fn units(text: &str) -> i128 {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let mut frac = frac.to_string();
    while frac.len() < 4 {
        frac.push('0');
    }
    let v = int.parse::<i128>().unwrap() * 10_000 + frac.parse::<i128>().unwrap();
    if neg {
        -v
    } else {
        v
    }
}

/// Every (stock, anchor date) candidate with its expected labels.
pub fn oracle(dir: &Path, lookback: usize) -> BTreeMap<(String, String), OracleRow> {
    let calendar: Vec<String> = std::fs::read_to_string(dir.join("calendar.txt"))
        .unwrap()
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();

    // (stock, day index, id)
    let mut news: Vec<(String, usize, String)> = Vec::new();
    for v in lines(dir, "news.jsonl") {
        let date = s(&v, "date");
        let mut day = None;
        for (i, c) in calendar.iter().enumerate() {
            if *c >= date {
                day = Some(i);
                break;
            }
        }
        let day = day.expect("oracle: news after calendar end");
        let id = s(&v, "id");
        let stocks: Vec<String> = match &v["stock"] {
            Value::Array(a) => a.iter().map(|x| x.as_str().unwrap().to_string()).collect(),
            x => vec![x.as_str().unwrap().to_string()],
        };
        let multi = stocks.len() > 1;
        for st in stocks {
            let st = st.trim().to_uppercase();
            let id = if multi { format!("{id}#{st}") } else { id.clone() };
            news.push((st, day, id));
        }
    }

    let mut by_stock: HashMap<String, Vec<Value>> = HashMap::new();
    for (kind, file) in [("r", "reports.jsonl"), ("p", "price_targets.jsonl"), ("t", "trades.jsonl")] {
        for mut v in lines(dir, file) {
            v["_kind"] = Value::from(kind);
            by_stock.entry(s(&v, "stock")).or_default().push(v);
        }
    }
    let empty = Vec::new();

    let mut news_by_stock: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    for (st, day, id) in news {
        news_by_stock.entry(st).or_default().push((day, id));
    }

    let mut out = BTreeMap::new();
    for (stock, news) in &news_by_stock {
        let events = by_stock.get(stock).unwrap_or(&empty);
        for t in 0..calendar.len() {
            if !news.iter().any(|n| n.0 == t) {
                continue;
            }
            let lo = t.saturating_sub(lookback);
            let mut window: Vec<(usize, String)> = news
                .iter()
                .filter(|n| n.0 >= lo && n.0 <= t)
                .cloned()
                .collect();
            window.sort();
            let window = window.into_iter().map(|w| w.1).collect();

            let row = if t + 1 == calendar.len() {
                let e = Err("NO_NEXT_DAY".to_string());
                OracleRow { window, timing: e.clone(), view: e.clone(), trading: e }
            } else {
                let today = &calendar[t];
                let next = &calendar[t + 1];
                let mut reported = false;
                let mut p_t = None;
                let mut p_next = None;
                let mut buys = 0i128;
                let mut sells = 0i128;
                let mut trades = 0;
                for e in events {
                    let date = s(e, "date");
                    match e["_kind"].as_str().unwrap() {
                        "r" if &date == next => reported = true,
                        "p" if &date == today => p_t = Some(units(&s(e, "avg_price_target"))),
                        "p" if &date == next => p_next = Some(units(&s(e, "avg_price_target"))),
                        "t" if &date == next => {
                            trades += 1;
                            buys += units(&s(e, "buy_amount"));
                            sells += units(&s(e, "sell_amount"));
                        }
                        _ => {}
                    }
                }
                let timing = Ok(if reported { "ReleaseReport" } else { "NotReleaseReport" }.to_string());
                let view = match (p_t, p_next) {
                    (Some(a), Some(b)) if b > a => Ok("Upgrade".to_string()),
                    (Some(a), Some(b)) if a > b => Ok("Downgrade".to_string()),
                    (Some(_), Some(_)) => Ok("Keep".to_string()),
                    _ => Err("MISSING_PT".to_string()),
                };
                let trading = if trades == 0 {
                    Ok("NoAction".to_string())
                } else if buys > sells {
                    Ok("Overweight".to_string())
                } else if sells > buys {
                    Ok("Underweight".to_string())
                } else {
                    Err("TIE".to_string())
                };
                OracleRow { window, timing, view, trading }
            };
            out.insert((stock.clone(), calendar[t].clone()), row);
        }
    }
    out
}
