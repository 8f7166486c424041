//! Provider-agnostic chat-completion client with a content-addressed
//! record/replay cache.
//!
//! The HTTP client speaks the widely implemented `chat/completions` JSON
//! shape (`model`, `messages[{role, content}]`, `choices[0].message.content`).
//! Nature/expert text is sent with the `user` role, the player's replies with
//! the `assistant` role.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const ENV_API_URL: &str = "LLM_API_URL";
pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_MODEL: &str = "LLM_MODEL";

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("chat backend not configured: {0}")]
    Config(String),
    #[error("request failed after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("malformed chat response: {0}")]
    Malformed(String),
    #[error("no recorded reply for transcript {key} in replay-only mode")]
    ReplayMiss { key: String },
    #[error("replay cache i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatRole {
    /// Game narration and the expert's review text.
    Nature,
    /// The LLM player.
    Agent,
}

impl ChatRole {
    fn api_role(self) -> &'static str {
        match self {
            ChatRole::Nature => "user",
            ChatRole::Agent => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub text: String,
}

/// Alternating conversation. Consecutive nature text is merged into one
/// message, so the player always receives everything said since its last
/// reply as a single turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTranscript {
    messages: Vec<ChatMessage>,
}

impl ChatTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn push_nature(&mut self, text: &str) {
        match self.messages.last_mut() {
            Some(m) if m.role == ChatRole::Nature => m.text.push_str(text),
            _ => self.messages.push(ChatMessage { role: ChatRole::Nature, text: text.to_string() }),
        }
    }

    pub fn push_agent(&mut self, text: &str) {
        self.messages.push(ChatMessage { role: ChatRole::Agent, text: text.to_string() });
    }

    pub fn api_messages(&self) -> Vec<Value> {
        self.messages
            .iter()
            .map(|m| json!({ "role": m.role.api_role(), "content": m.text }))
            .collect()
    }
}

pub trait ChatBackend: Send + Sync {
    fn model_name(&self) -> &str;

    fn complete(&self, transcript: &ChatTranscript) -> Result<String, ChatError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Arc<B> {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }

    fn complete(&self, transcript: &ChatTranscript) -> Result<String, ChatError> {
        (**self).complete(transcript)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    /// Runs `op` up to `attempts` times, doubling the delay after each failure.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, String>) -> Result<T, ChatError> {
        let mut delay = self.base_delay;
        let mut last = String::new();
        for attempt in 1..=self.attempts.max(1) {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::warn!("chat request attempt {attempt} failed: {e}");
                    last = e;
                    if attempt < self.attempts {
                        thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(ChatError::Exhausted { attempts: self.attempts.max(1), last })
    }
}

/// Global minimum spacing between outgoing requests, shared by every agent
/// of a generation run.
#[derive(Debug)]
pub struct RateLimiter {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(min_interval: Duration) -> Self {
        RateLimiter { min_interval, last: Mutex::new(None) }
    }

    pub fn acquire(&self) {
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

/// Shared HTTP plumbing for chat-completion style endpoints.
#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    pub url: String,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
    pub limiter: Option<Arc<RateLimiter>>,
    agent: ureq::Agent,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, api_key: Option<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        HttpEndpoint {
            url: url.into(),
            api_key,
            retry: RetryPolicy::default(),
            limiter: None,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn post(&self, body: &Value) -> Result<Value, ChatError> {
        self.retry.run(|| {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
            resp.body_mut().read_json::<Value>().map_err(|e| e.to_string())
        })
    }
}

pub fn reply_text(response: &Value) -> Result<String, ChatError> {
    response
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ChatError::Malformed(format!("no choices[0].message.content in {response}")))
}

#[derive(Debug, Clone)]
pub struct HttpChatClient {
    endpoint: HttpEndpoint,
    model: String,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
}

impl HttpChatClient {
    pub fn new(endpoint: HttpEndpoint, model: impl Into<String>) -> Self {
        HttpChatClient { endpoint, model: model.into(), temperature: None, max_tokens: Some(16) }
    }

    /// Reads `LLM_API_URL` (full chat-completions URL), `LLM_API_KEY`
    /// (optional) and `LLM_MODEL`.
    pub fn from_env() -> Result<Self, ChatError> {
        let url = std::env::var(ENV_API_URL)
            .map_err(|_| ChatError::Config(format!("{ENV_API_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL)
            .map_err(|_| ChatError::Config(format!("{ENV_MODEL} is not set")))?;
        let key = std::env::var(ENV_API_KEY).ok();
        Ok(Self::new(HttpEndpoint::new(url, key), model))
    }

    pub fn with_temperature(mut self, t: Option<f64>) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.endpoint.limiter = Some(limiter);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.endpoint.retry = retry;
        self
    }

    pub fn request_body(&self, transcript: &ChatTranscript) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": transcript.api_messages(),
        });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = self.max_tokens {
            body["max_tokens"] = json!(m);
        }
        body
    }
}

impl ChatBackend for HttpChatClient {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn complete(&self, transcript: &ChatTranscript) -> Result<String, ChatError> {
        let response = self.endpoint.post(&self.request_body(transcript))?;
        reply_text(&response)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    /// Serve only recorded replies; a miss is an error. Never touches the network.
    ReplayOnly,
    /// Serve recorded replies and record new ones from the inner backend.
    Record,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordedReply {
    model: String,
    messages: Vec<ChatMessage>,
    reply: String,
}

/// Wraps a backend with replies stored as `<dir>/<sha256>.json`, keyed by the
/// model name and the full transcript sent.
pub struct ReplayCache<B> {
    dir: PathBuf,
    mode: ReplayMode,
    model: String,
    inner: Option<B>,
}

impl<B: ChatBackend> ReplayCache<B> {
    pub fn recording(dir: impl Into<PathBuf>, inner: B) -> Self {
        let model = inner.model_name().to_string();
        ReplayCache { dir: dir.into(), mode: ReplayMode::Record, model, inner: Some(inner) }
    }
}

impl ReplayCache<HttpChatClient> {
    pub fn replay_only(dir: impl Into<PathBuf>, model: impl Into<String>) -> Self {
        ReplayCache { dir: dir.into(), mode: ReplayMode::ReplayOnly, model: model.into(), inner: None }
    }
}

impl<B> ReplayCache<B> {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(&self, transcript: &ChatTranscript) -> String {
        transcript_key(&self.model, transcript)
    }
}

pub fn transcript_key(model: &str, transcript: &ChatTranscript) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(serde_json::to_vec(transcript.messages()).expect("messages serialize"));
    hex::encode(h.finalize())
}

impl<B: ChatBackend> ChatBackend for ReplayCache<B> {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn complete(&self, transcript: &ChatTranscript) -> Result<String, ChatError> {
        let key = self.key(transcript);
        let path = self.dir.join(format!("{key}.json"));
        if path.exists() {
            let rec: RecordedReply = serde_json::from_slice(&fs::read(&path)?)
                .map_err(|e| ChatError::Malformed(format!("{}: {e}", path.display())))?;
            return Ok(rec.reply);
        }
        let inner = match (self.mode, &self.inner) {
            (ReplayMode::Record, Some(inner)) => inner,
            _ => return Err(ChatError::ReplayMiss { key }),
        };
        let reply = inner.complete(transcript)?;
        fs::create_dir_all(&self.dir)?;
        let rec = RecordedReply {
            model: self.model.clone(),
            messages: transcript.messages().to_vec(),
            reply: reply.clone(),
        };
        // write-then-rename keeps concurrent readers from seeing partial files
        let tmp = self.dir.join(format!("{key}.json.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&rec).expect("record serializes"))?;
        fs::rename(tmp, path)?;
        Ok(reply)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Replies from a fixed script, recording every transcript it was sent.
    pub struct ScriptedChat {
        pub replies: Mutex<Vec<String>>,
        pub seen: Mutex<Vec<ChatTranscript>>,
    }

    impl ScriptedChat {
        pub fn new(replies: &[&str]) -> Self {
            ScriptedChat {
                replies: Mutex::new(replies.iter().rev().map(|s| s.to_string()).collect()),
                seen: Mutex::new(Vec::new()),
            }
        }
    }

    impl ChatBackend for ScriptedChat {
        fn model_name(&self) -> &str {
            "scripted"
        }

        fn complete(&self, transcript: &ChatTranscript) -> Result<String, ChatError> {
            self.seen.lock().unwrap().push(transcript.clone());
            self.replies
                .lock()
                .unwrap()
                .pop()
                .ok_or_else(|| ChatError::Exhausted { attempts: 1, last: "script empty".into() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::ScriptedChat;
    use super::*;

    #[test]
    fn nature_text_is_concatenated() {
        let mut t = ChatTranscript::new();
        t.push_nature("a");
        t.push_nature("b");
        t.push_agent("Go");
        t.push_nature("c");
        assert_eq!(t.messages().len(), 3);
        assert_eq!(t.messages()[0].text, "ab");
        assert_eq!(t.api_messages()[1]["role"], "assistant");
    }

    #[test]
    fn retry_gives_up_after_budget() {
        let policy = RetryPolicy { attempts: 3, base_delay: Duration::ZERO };
        let mut calls = 0;
        let r: Result<(), _> = policy.run(|| {
            calls += 1;
            Err("boom".to_string())
        });
        assert_eq!(calls, 3);
        assert!(matches!(r, Err(ChatError::Exhausted { attempts: 3, .. })));
        let mut calls = 0;
        let r = policy.run(|| {
            calls += 1;
            if calls < 2 { Err("once".to_string()) } else { Ok(calls) }
        });
        assert_eq!(r.unwrap(), 2);
    }

    #[test]
    fn record_then_replay_without_backend() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = ChatTranscript::new();
        t.push_nature("Round: 1");
        let rec = ReplayCache::recording(dir.path(), ScriptedChat::new(&["Go"]));
        assert_eq!(rec.complete(&t).unwrap(), "Go");
        // second call is served from disk; the script is empty now
        assert_eq!(rec.complete(&t).unwrap(), "Go");

        let replay = ReplayCache::replay_only(dir.path(), "scripted");
        assert_eq!(replay.complete(&t).unwrap(), "Go");
        t.push_nature(" changed");
        assert!(matches!(replay.complete(&t), Err(ChatError::ReplayMiss { .. })));
    }

    #[test]
    fn request_body_shape() {
        let c = HttpChatClient::new(HttpEndpoint::new("http://localhost:1/v1/chat/completions", None), "m")
            .with_temperature(Some(0.7));
        let mut t = ChatTranscript::new();
        t.push_nature("hi");
        let b = c.request_body(&t);
        assert_eq!(b["model"], "m");
        assert_eq!(b["messages"][0]["role"], "user");
        assert_eq!(b["temperature"], 0.7);
    }

    #[test]
    fn reply_extraction() {
        let v = json!({"choices": [{"message": {"content": "Go"}}]});
        assert_eq!(reply_text(&v).unwrap(), "Go");
        assert!(reply_text(&json!({})).is_err());
    }
}
