//! Client for external plugin processes.
//!
//! Wire format: one JSON object per line on the plugin's stdin/stdout.
//! The engine opens with `{"method":"hello","version":1}` and expects
//! `{"ok":true,"name":..,"methods":[..]}`. Requests carry a string `id`;
//! responses may arrive in any order and are matched by that id.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::baseline::{Classifier, Prediction};
use super::generator::{GenFailure, Generator};
use super::CodError;
use crate::domain::NewsItem;

pub const PROTOCOL_VERSION: u64 = 1;

type Reply = Result<Value, String>;

#[derive(Default)]
struct Pending {
    alive: bool,
    waiting: HashMap<String, Sender<Reply>>,
}

pub struct PluginClient {
    name: String,
    methods: Vec<String>,
    child: Mutex<Child>,
    stdin: Mutex<Option<ChildStdin>>,
    pending: Arc<Mutex<Pending>>,
    next_id: AtomicU64,
    timeout: Duration,
    reader: Option<JoinHandle<()>>,
}

fn reader_loop(stdout: impl BufRead, pending: Arc<Mutex<Pending>>, hello: Sender<Reply>) {
    let mut hello = Some(hello);
    for line in stdout.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("plugin sent a malformed line ({e}): {line}");
                continue;
            }
        };
        match value.get("id").and_then(Value::as_str) {
            Some(id) => {
                let waiter = pending.lock().unwrap().waiting.remove(id);
                match waiter {
                    Some(tx) => {
                        let _ = tx.send(Ok(value));
                    }
                    None => log::warn!("plugin answered unknown or expired id {id:?}"),
                }
            }
            None => match hello.take() {
                Some(tx) => {
                    let _ = tx.send(Ok(value));
                }
                None => log::warn!("plugin sent a line without id: {line}"),
            },
        }
    }
    let mut p = pending.lock().unwrap();
    p.alive = false;
    for (_, tx) in p.waiting.drain() {
        let _ = tx.send(Err("plugin exited".to_string()));
    }
}

impl PluginClient {
    /// Starts `command` (split like a POSIX shell would) and performs the
    /// handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, CodError> {
        let argv = shlex::split(command)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| CodError::InvalidConfig(format!("cannot parse plugin command {command:?}")))?;
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| CodError::GeneratorUnavailable(format!("{}: {e}", argv[0])))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let pending = Arc::new(Mutex::new(Pending {
            alive: true,
            waiting: HashMap::new(),
        }));
        let (hello_tx, hello_rx) = mpsc::channel();
        let reader = {
            let pending = Arc::clone(&pending);
            std::thread::spawn(move || reader_loop(BufReader::new(stdout), pending, hello_tx))
        };
        let mut client = PluginClient {
            name: String::new(),
            methods: Vec::new(),
            child: Mutex::new(child),
            stdin: Mutex::new(Some(stdin)),
            pending,
            next_id: AtomicU64::new(1),
            timeout,
            reader: Some(reader),
        };
        client
            .send_line(&json!({"method": "hello", "version": PROTOCOL_VERSION}))
            .map_err(CodError::GeneratorUnavailable)?;
        let reply = match hello_rx.recv_timeout(timeout) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => return Err(CodError::GeneratorUnavailable(e)),
            Err(_) => {
                return Err(CodError::GeneratorUnavailable(
                    "no handshake reply from plugin".to_string(),
                ))
            }
        };
        if reply.get("ok") != Some(&Value::Bool(true)) {
            return Err(CodError::PluginProtocol(format!("handshake refused: {reply}")));
        }
        client.name = reply
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| CodError::PluginProtocol(format!("handshake lacks a name: {reply}")))?
            .to_string();
        client.methods = reply
            .get("methods")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
            .unwrap_or_default();
        Ok(client)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn supports(&self, method: &str) -> bool {
        self.methods.iter().any(|m| m == method)
    }

    fn send_line(&self, value: &Value) -> Result<(), String> {
        let mut line = serde_json::to_string(value).expect("request serializes");
        line.push('\n');
        let mut guard = self.stdin.lock().unwrap();
        let stdin = guard.as_mut().ok_or("plugin stdin closed")?;
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| format!("writing to plugin: {e}"))
    }

    /// Sends one request and waits for the matching response.
    pub fn call(&self, mut request: Value) -> Result<Value, GenFailure> {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst).to_string();
        request["id"] = Value::from(id.clone());
        let (tx, rx) = mpsc::channel();
        {
            let mut p = self.pending.lock().unwrap();
            if !p.alive {
                return Err(GenFailure::Dead("plugin exited".into()));
            }
            p.waiting.insert(id.clone(), tx);
        }
        if let Err(e) = self.send_line(&request) {
            self.pending.lock().unwrap().waiting.remove(&id);
            return Err(GenFailure::Dead(e));
        }
        match rx.recv_timeout(self.timeout) {
            Ok(Ok(v)) if v.get("ok") == Some(&Value::Bool(true)) => Ok(v),
            Ok(Ok(v)) => Err(GenFailure::Item(
                v.get("error")
                    .and_then(Value::as_str)
                    .unwrap_or("plugin reported failure")
                    .to_string(),
            )),
            Ok(Err(e)) => Err(GenFailure::Dead(e)),
            Err(RecvTimeoutError::Timeout) => {
                self.pending.lock().unwrap().waiting.remove(&id);
                Err(GenFailure::Item(format!("no response within {:?}", self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => Err(GenFailure::Dead("plugin exited".into())),
        }
    }
}

impl Drop for PluginClient {
    fn drop(&mut self) {
        self.stdin.lock().unwrap().take();
        let mut child = self.child.lock().unwrap();
        let deadline = Instant::now() + Duration::from_secs(2);
        loop {
            match child.try_wait() {
                Ok(Some(_)) | Err(_) => break,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break;
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(10)),
            }
        }
        drop(child);
        if let Some(r) = self.reader.take() {
            let _ = r.join();
        }
    }
}

/// Opinion generator backed by a plugin's `generate` method.
pub struct PluginGenerator {
    client: PluginClient,
}

impl PluginGenerator {
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, CodError> {
        let client = PluginClient::spawn(command, timeout)?;
        if !client.supports("generate") {
            return Err(CodError::PluginProtocol(format!(
                "plugin {:?} does not offer generate",
                client.name()
            )));
        }
        Ok(PluginGenerator { client })
    }
}

impl Generator for PluginGenerator {
    fn name(&self) -> &str {
        self.client.name()
    }

    fn generate(&self, _item: &NewsItem, prompt: &str) -> Result<String, GenFailure> {
        let v = self.client.call(json!({"method": "generate", "prompt": prompt}))?;
        v.get("text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| GenFailure::Item(format!("generate response without text: {v}")))
    }
}

/// Classifier backed by a plugin's `classify` method.
pub struct PluginClassifier {
    client: PluginClient,
    labels: Vec<String>,
}

impl PluginClassifier {
    pub fn spawn(command: &str, labels: Vec<String>, timeout: Duration) -> Result<Self, CodError> {
        let client = PluginClient::spawn(command, timeout)?;
        if !client.supports("classify") {
            return Err(CodError::PluginProtocol(format!(
                "plugin {:?} does not offer classify",
                client.name()
            )));
        }
        let mut labels = labels;
        labels.sort();
        Ok(PluginClassifier { client, labels })
    }
}

impl Classifier for PluginClassifier {
    fn predict(&self, text: &str) -> Result<Prediction, CodError> {
        let v = self
            .client
            .call(json!({"method": "classify", "text": text, "labels": self.labels}))
            .map_err(|e| CodError::PluginProtocol(format!("{e:?}")))?;
        let raw = v
            .get("scores")
            .and_then(Value::as_object)
            .ok_or_else(|| CodError::PluginProtocol(format!("classify response without scores: {v}")))?;
        let mut scores = BTreeMap::new();
        for label in &self.labels {
            let s = raw
                .get(label)
                .and_then(Value::as_f64)
                .ok_or_else(|| CodError::PluginProtocol(format!("no score for {label:?} in {v}")))?;
            scores.insert(label.clone(), s);
        }
        Ok(Prediction::from_scores(scores))
    }
}
