use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::cache::OpinionCache;
use super::prompt::PromptTemplate;
use super::CodError;
use crate::domain::NewsItem;
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opinion {
    pub news_id: String,
    pub text: String,
    pub generator_name: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Failure of one generation attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenFailure {
    /// The generator answered with an error, or timed out; worth retrying.
    Item(String),
    /// The generator is gone; nothing further will succeed.
    Dead(String),
}

pub trait Generator: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, item: &NewsItem, prompt: &str) -> Result<String, GenFailure>;
}

/// Echoes the headline back as the opinion.
#[derive(Debug, Default)]
pub struct EchoStub;

impl Generator for EchoStub {
    fn name(&self) -> &str {
        "stub-echo"
    }

    fn generate(&self, item: &NewsItem, _prompt: &str) -> Result<String, GenFailure> {
        Ok(item.headline.clone())
    }
}

/// Maps cue words found in the prompt to fixed phrases.
#[derive(Debug, Clone)]
pub struct CueStub {
    phrases: BTreeMap<String, String>,
}

impl CueStub {
    /// `lexicon` maps a class name to its cue words; every cue of class `C`
    /// produces the phrase `opinion leans c`.
    pub fn from_lexicon(lexicon: &BTreeMap<String, Vec<String>>) -> Self {
        let phrases = lexicon
            .iter()
            .flat_map(|(class, words)| {
                let phrase = format!("opinion leans {}", class.to_lowercase());
                words.iter().map(move |w| (w.to_lowercase(), phrase.clone()))
            })
            .collect();
        CueStub { phrases }
    }
}

impl Generator for CueStub {
    fn name(&self) -> &str {
        "stub-cue"
    }

    fn generate(&self, _item: &NewsItem, prompt: &str) -> Result<String, GenFailure> {
        let mut found: Vec<&str> = Vec::new();
        for token in tokenize(prompt) {
            if let Some(p) = self.phrases.get(&token) {
                if !found.contains(&p.as_str()) {
                    found.push(p);
                }
            }
        }
        if found.is_empty() {
            Ok("opinion unclear".to_string())
        } else {
            Ok(found.join(" "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOptions {
    pub concurrency: usize,
    pub retries: u32,
    /// Sleep before retry k (the last entry repeats).
    pub backoff_ms: Vec<u64>,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            concurrency: 8,
            retries: 2,
            backoff_ms: vec![250, 1000],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub items: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub requests: usize,
    pub retries: usize,
    pub errored: usize,
    pub max_in_flight: usize,
}

struct Shared {
    next: AtomicUsize,
    dead: AtomicBool,
    dead_reason: Mutex<Option<String>>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    requests: AtomicUsize,
    retries: AtomicUsize,
    results: Mutex<Vec<Option<Opinion>>>,
}

/// One opinion per distinct news item. Cached opinions are reused; new
/// successful ones are cached as soon as they arrive, so an interrupted run
/// resumes where it stopped. Items that keep failing after the retries get
/// an empty opinion with the error recorded.
pub fn generate_opinions(
    items: &[&NewsItem],
    generator: &dyn Generator,
    template: &PromptTemplate,
    cache: Option<&OpinionCache>,
    options: &GenerationOptions,
) -> Result<(BTreeMap<String, Opinion>, GenerationStats), CodError> {
    let mut unique: Vec<&NewsItem> = items.to_vec();
    unique.sort_by(|a, b| a.id.cmp(&b.id));
    unique.dedup_by(|a, b| a.id == b.id);

    let mut stats = GenerationStats {
        items: unique.len(),
        ..Default::default()
    };
    let mut opinions = BTreeMap::new();
    let mut todo: Vec<&NewsItem> = Vec::new();
    for item in unique {
        match cache.and_then(|c| c.get(generator.name(), &template.name, &item.id)) {
            Some(op) => {
                stats.cache_hits += 1;
                opinions.insert(item.id.clone(), op);
            }
            None => todo.push(item),
        }
    }
    stats.cache_misses = todo.len();
    if todo.is_empty() {
        return Ok((opinions, stats));
    }

    let shared = Shared {
        next: AtomicUsize::new(0),
        dead: AtomicBool::new(false),
        dead_reason: Mutex::new(None),
        in_flight: AtomicUsize::new(0),
        max_in_flight: AtomicUsize::new(0),
        requests: AtomicUsize::new(0),
        retries: AtomicUsize::new(0),
        results: Mutex::new(vec![None; todo.len()]),
    };
    let workers = options.concurrency.max(1).min(todo.len());
    let fatal: Mutex<Option<CodError>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                while !shared.dead.load(Ordering::SeqCst) {
                    let i = shared.next.fetch_add(1, Ordering::SeqCst);
                    let Some(item) = todo.get(i) else { break };
                    let prompt = match template.render(item) {
                        Ok(p) => p,
                        Err(e) => {
                            *fatal.lock().unwrap() = Some(e);
                            shared.dead.store(true, Ordering::SeqCst);
                            break;
                        }
                    };
                    let Some(op) = attempt(item, &prompt, generator, options, &shared) else {
                        break;
                    };
                    if op.error.is_none() {
                        if let Some(c) = cache {
                            if let Err(e) = c.put(&template.name, &op) {
                                *fatal.lock().unwrap() = Some(e);
                            }
                        }
                    }
                    shared.results.lock().unwrap()[i] = Some(op);
                }
            });
        }
    });

    if let Some(e) = fatal.into_inner().unwrap() {
        return Err(e);
    }
    stats.requests = shared.requests.into_inner();
    stats.retries = shared.retries.into_inner();
    stats.max_in_flight = shared.max_in_flight.into_inner();
    let results = shared.results.into_inner().unwrap();
    let completed = results.iter().filter(|r| r.is_some()).count();
    if shared.dead.into_inner() {
        let reason = shared.dead_reason.into_inner().unwrap().unwrap_or_default();
        let answered = results.iter().flatten().any(|o| o.error.is_none());
        if !answered && stats.cache_hits == 0 {
            return Err(CodError::GeneratorUnavailable(reason));
        }
        log::error!("generator lost: {reason}");
        return Err(CodError::GeneratorLost {
            completed: completed + stats.cache_hits,
            remaining: todo.len() - completed,
        });
    }
    for op in results.into_iter().flatten() {
        if op.error.is_some() {
            stats.errored += 1;
        }
        opinions.insert(op.news_id.clone(), op);
    }
    Ok((opinions, stats))
}

/// Tries one item with retries. `None` means the generator died.
fn attempt(
    item: &NewsItem,
    prompt: &str,
    generator: &dyn Generator,
    options: &GenerationOptions,
    shared: &Shared,
) -> Option<Opinion> {
    let mut last_error = String::new();
    for round in 0..=options.retries {
        if round > 0 {
            shared.retries.fetch_add(1, Ordering::SeqCst);
            let idx = (round as usize - 1).min(options.backoff_ms.len().saturating_sub(1));
            let wait = options.backoff_ms.get(idx).copied().unwrap_or(0);
            std::thread::sleep(Duration::from_millis(wait));
        }
        if shared.dead.load(Ordering::SeqCst) {
            return None;
        }
        let now = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        shared.max_in_flight.fetch_max(now, Ordering::SeqCst);
        shared.requests.fetch_add(1, Ordering::SeqCst);
        let started = Instant::now();
        let result = generator.generate(item, prompt);
        shared.in_flight.fetch_sub(1, Ordering::SeqCst);
        match result {
            Ok(text) => {
                return Some(Opinion {
                    news_id: item.id.clone(),
                    text,
                    generator_name: generator.name().to_string(),
                    latency_ms: started.elapsed().as_millis() as u64,
                    error: None,
                })
            }
            Err(GenFailure::Item(e)) => {
                log::warn!("opinion for {} failed (attempt {}): {e}", item.id, round + 1);
                last_error = e;
            }
            Err(GenFailure::Dead(e)) => {
                shared.dead_reason.lock().unwrap().get_or_insert(e);
                shared.dead.store(true, Ordering::SeqCst);
                return None;
            }
        }
    }
    Some(Opinion {
        news_id: item.id.clone(),
        text: String::new(),
        generator_name: generator.name().to_string(),
        latency_ms: 0,
        error: Some(last_error),
    })
}
