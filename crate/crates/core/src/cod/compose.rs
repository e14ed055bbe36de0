use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::generator::Opinion;
use super::CodError;
use crate::domain::{Instance, NewsItem};

/// Marks where an opinion starts (or ends, when opinions come first).
pub const SEPARATOR: &str = "⟦OP⟧";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComposeMode {
    NewsOnly,
    NewsThenOpinion,
    OpinionThenNews,
}

impl ComposeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ComposeMode::NewsOnly => "news_only",
            ComposeMode::NewsThenOpinion => "news_then_opinion",
            ComposeMode::OpinionThenNews => "opinion_then_news",
        }
    }

    pub fn uses_opinions(self) -> bool {
        self != ComposeMode::NewsOnly
    }
}

impl fmt::Display for ComposeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComposeMode {
    type Err = CodError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "news_only" => Ok(ComposeMode::NewsOnly),
            "news_then_opinion" => Ok(ComposeMode::NewsThenOpinion),
            "opinion_then_news" => Ok(ComposeMode::OpinionThenNews),
            _ => Err(CodError::InvalidConfig(format!(
                "compose mode {s:?} (expected news_only, news_then_opinion or opinion_then_news)"
            ))),
        }
    }
}

/// Which window items feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScope {
    /// Every item in [t−T, t].
    #[default]
    Window,
    /// Only the items published on day t.
    Anchor,
}

impl FromStr for InputScope {
    type Err = CodError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "window" => Ok(InputScope::Window),
            "anchor" => Ok(InputScope::Anchor),
            _ => Err(CodError::InvalidConfig(format!("input scope {s:?} (expected window or anchor)"))),
        }
    }
}

/// The items of `instance` selected by `scope`, oldest first.
pub fn scoped_items(instance: &Instance, scope: InputScope) -> impl Iterator<Item = &NewsItem> {
    let t = instance.anchor_day.ordinal;
    instance
        .window
        .iter()
        .filter(move |n| scope == InputScope::Window || n.day.ordinal == t)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedInput {
    pub key: String,
    pub text: String,
    pub mode: ComposeMode,
    pub truncated: bool,
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Joins the window newest-last. When over `max_len` whitespace tokens the
/// oldest units (a news item, or a news/opinion pair) are dropped first; a
/// single remaining unit that is still too long loses tokens from its tail.
pub fn compose_input(
    instance: &Instance,
    scope: InputScope,
    opinions: &BTreeMap<String, Opinion>,
    mode: ComposeMode,
    max_len: usize,
) -> ComposedInput {
    let units: Vec<String> = scoped_items(instance, scope)
        .map(|item| {
            let opinion = || opinions.get(&item.id).map(|o| o.text.as_str()).unwrap_or("");
            match mode {
                ComposeMode::NewsOnly => item.body.clone(),
                ComposeMode::NewsThenOpinion => format!("{} {SEPARATOR} {}", item.body, opinion()),
                ComposeMode::OpinionThenNews => format!("{} {SEPARATOR} {}", opinion(), item.body),
            }
        })
        .collect();
    let lengths: Vec<usize> = units.iter().map(|u| token_count(u)).collect();

    let mut start = 0;
    let mut total: usize = lengths.iter().sum();
    while total > max_len && units.len() - start > 1 {
        total -= lengths[start];
        start += 1;
    }
    let mut truncated = start > 0;
    let mut text = units[start..].join(" ");
    if total > max_len {
        text = text.split_whitespace().take(max_len).collect::<Vec<_>>().join(" ");
        truncated = true;
    }
    ComposedInput {
        key: instance.key(),
        text,
        mode,
        truncated,
    }
}
