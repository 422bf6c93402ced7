use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::backend::{Completion, CompletionBackend, CompletionRequest};
use super::LlmError;

pub const API_KEY_ENV: &str = "SCENARIO_FORGE_API_KEY";
pub const API_BASE_ENV: &str = "SCENARIO_FORGE_API_BASE";
pub const DEFAULT_TEMPERATURE: f64 = 1.0;
/// Retries after the first try, only for transport failures and HTTP 429.
pub const MAX_RETRIES: usize = 3;

static NETWORK_REQUESTS: AtomicUsize = AtomicUsize::new(0);

/// Process-wide count of HTTP requests sent by [`ReqwestTransport`].
pub fn network_requests() -> usize {
    NETWORK_REQUESTS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// The one HTTP call the live backend needs; swapped out in tests.
pub trait HttpTransport: Send + Sync {
    /// `Err` means no HTTP response arrived at all.
    fn post_json(&self, url: &str, bearer: &str, body: &Value) -> Result<HttpResponse, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(&self, url: &str, bearer: &str, body: &Value) -> Result<HttpResponse, String> {
        NETWORK_REQUESTS.fetch_add(1, Ordering::SeqCst);
        let resp = self
            .client
            .post(url)
            .bearer_auth(bearer)
            .json(body)
            .send()
            .map_err(|e| e.without_url().to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Clone)]
pub struct LiveConfig {
    /// Base URL up to and excluding `/v1/chat/completions`.
    pub api_base: String,
    pub api_key: String,
    pub model: String,
    pub temperature: f64,
    pub max_concurrency: usize,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl fmt::Debug for LiveConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LiveConfig")
            .field("api_base", &self.api_base)
            .field("api_key", &"<redacted>")
            .field("model", &self.model)
            .field("temperature", &self.temperature)
            .field("max_concurrency", &self.max_concurrency)
            .finish_non_exhaustive()
    }
}

impl LiveConfig {
    pub fn new(api_base: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            api_base: api_base.into(),
            api_key: api_key.into(),
            model: model.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_concurrency: 4,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads the endpoint and key from the environment.
    pub fn from_env(model: impl Into<String>) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| LlmError::Config(format!("{API_KEY_ENV} is not set")))?;
        let base = std::env::var(API_BASE_ENV).unwrap_or_else(|_| "https://api.openai.com".into());
        Ok(Self::new(base, key, model))
    }

    fn url(&self) -> String {
        format!("{}/v1/chat/completions", self.api_base.trim_end_matches('/'))
    }
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

/// OpenAI-compatible chat-completions client.
pub struct LiveBackend {
    config: LiveConfig,
    transport: Box<dyn HttpTransport>,
    gate: Gate,
}

impl fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LiveBackend").field("config", &self.config).finish_non_exhaustive()
    }
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, LlmError> {
        let transport = ReqwestTransport::new(config.timeout)?;
        Ok(Self::with_transport(config, Box::new(transport)))
    }

    pub fn with_transport(config: LiveConfig, transport: Box<dyn HttpTransport>) -> Self {
        let slots = config.max_concurrency.max(1);
        Self {
            config,
            transport,
            gate: Gate {
                free: Mutex::new(slots),
                cv: Condvar::new(),
            },
        }
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        })
    }
}

fn message_content(body: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::Response(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| LlmError::Response("no choices[0].message.content in response".into()))
}

impl CompletionBackend for LiveBackend {
    fn id(&self) -> String {
        format!("live:{}", self.config.model)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let body = self.request_body(&request.prompt);
        let url = self.config.url();
        let _slot = self.gate.acquire();
        let mut tries = 0;
        loop {
            let outcome = self.transport.post_json(&url, &self.config.api_key, &body);
            let retryable = match &outcome {
                Err(_) => true,
                Ok(r) => r.status == 429,
            };
            if retryable && tries < MAX_RETRIES {
                tries += 1;
                std::thread::sleep(self.config.backoff * (1 << (tries - 1)));
                continue;
            }
            let resp = outcome.map_err(LlmError::Transport)?;
            if !(200..300).contains(&resp.status) {
                return Err(LlmError::Http {
                    status: resp.status,
                    body: resp.body.chars().take(500).collect(),
                });
            }
            return Ok(Completion {
                text: message_content(&resp.body)?,
                model: Some(self.config.model.clone()),
                temperature: Some(self.config.temperature),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fake {
        replies: Mutex<Vec<Result<HttpResponse, String>>>,
        bodies: Mutex<Vec<Value>>,
    }

    impl HttpTransport for &'static Fake {
        fn post_json(&self, _url: &str, _bearer: &str, body: &Value) -> Result<HttpResponse, String> {
            self.bodies.lock().unwrap().push(body.clone());
            self.replies.lock().unwrap().remove(0)
        }
    }

    fn ok(text: &str) -> Result<HttpResponse, String> {
        Ok(HttpResponse {
            status: 200,
            body: json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string(),
        })
    }

    fn backend(replies: Vec<Result<HttpResponse, String>>) -> (LiveBackend, &'static Fake) {
        let fake: &'static Fake = Box::leak(Box::new(Fake {
            replies: Mutex::new(replies),
            bodies: Mutex::new(vec![]),
        }));
        let mut cfg = LiveConfig::new("http://unused", "sk-secret", "gpt-4o");
        cfg.backoff = Duration::ZERO;
        (LiveBackend::with_transport(cfg, Box::new(fake)), fake)
    }

    #[test]
    fn retries_transport_errors_and_429_only() {
        let busy = Ok(HttpResponse {
            status: 429,
            body: String::new(),
        });
        let (b, fake) = backend(vec![Err("reset".into()), busy, ok("done")]);
        let c = b.complete(&CompletionRequest::new("hi", 0)).unwrap();
        assert_eq!(c.text, "done");
        assert_eq!(c.temperature, Some(1.0));
        let bodies = fake.bodies.lock().unwrap();
        assert_eq!(bodies.len(), 3);
        assert_eq!(bodies[0]["messages"][0]["content"], "hi");
        assert_eq!(bodies[0]["model"], "gpt-4o");

        let server_error = Ok(HttpResponse {
            status: 500,
            body: "boom".into(),
        });
        let (b, fake) = backend(vec![server_error, ok("never")]);
        assert!(matches!(
            b.complete(&CompletionRequest::new("hi", 0)),
            Err(LlmError::Http { status: 500, .. })
        ));
        assert_eq!(fake.bodies.lock().unwrap().len(), 1);
    }

    #[test]
    fn gives_up_after_three_retries() {
        let (b, fake) = backend((0..5).map(|_| Err("down".to_string())).collect());
        assert!(matches!(b.complete(&CompletionRequest::new("x", 0)), Err(LlmError::Transport(_))));
        assert_eq!(fake.bodies.lock().unwrap().len(), 1 + MAX_RETRIES);
    }

    #[test]
    fn key_never_printed() {
        let (b, _) = backend(vec![]);
        let shown = format!("{b:?}");
        assert!(!shown.contains("sk-secret"), "{shown}");
    }
}
