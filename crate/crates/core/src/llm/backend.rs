use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::LlmError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub prompt: String,
    /// Index of the attempt within a multi-pass experiment.
    pub attempt: usize,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, attempt: usize) -> Self {
        Self {
            prompt: prompt.into(),
            attempt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub model: Option<String>,
    pub temperature: Option<f64>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            model: None,
            temperature: None,
        }
    }
}

/// Anything that turns a prompt into a completion. Implementations must be
/// safe to call from several threads at once.
pub trait CompletionBackend: Send + Sync {
    /// Short identifier recorded in provenance.
    fn id(&self) -> String;

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        (**self).complete(request)
    }
}

/// LF line endings, no trailing whitespace on any line or at the end.
pub fn normalize_prompt(prompt: &str) -> String {
    let unified = prompt.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<&str> = unified.split('\n').map(str::trim_end).collect();
    lines.join("\n").trim_end().to_string()
}

/// Hex SHA-256 of the normalized prompt.
pub fn fixture_key(prompt: &str) -> String {
    hex::encode(Sha256::digest(normalize_prompt(prompt).as_bytes()))
}

/// Serves recorded completions from `<dir>/<hash>.<attempt>.txt`, falling
/// back to `<dir>/<hash>.txt`. Never touches the network.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    dir: PathBuf,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn fixture_path(&self, request: &CompletionRequest) -> Option<PathBuf> {
        let hash = fixture_key(&request.prompt);
        [format!("{hash}.{}.txt", request.attempt), format!("{hash}.txt")]
            .into_iter()
            .map(|name| self.dir.join(name))
            .find(|p| p.is_file())
    }
}

impl CompletionBackend for ReplayBackend {
    fn id(&self) -> String {
        "replay".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let path = self.fixture_path(request).ok_or_else(|| LlmError::FixtureMiss {
            hash: fixture_key(&request.prompt),
            dir: self.dir.display().to_string(),
        })?;
        let text = std::fs::read_to_string(&path).map_err(|e| LlmError::io(&path, e))?;
        Ok(Completion::text(text))
    }
}

/// Hands out queued responses in order, whatever the prompt.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn push(&self, response: impl Into<String>) {
        self.queue.lock().expect("queue lock").push_back(response.into());
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("queue lock").len()
    }

    /// Every prompt received so far, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt lock").clone()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn id(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        self.prompts.lock().expect("prompt lock").push(request.prompt.clone());
        self.queue
            .lock()
            .expect("queue lock")
            .pop_front()
            .map(Completion::text)
            .ok_or(LlmError::QueueEmpty)
    }
}

/// Passes calls through and stores each response as a replay fixture.
#[derive(Debug)]
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| LlmError::io(&dir, e))?;
        Ok(Self { inner, dir })
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let completion = self.inner.complete(request)?;
        let path = self
            .dir
            .join(format!("{}.{}.txt", fixture_key(&request.prompt), request.attempt));
        std::fs::write(&path, &completion.text).map_err(|e| LlmError::io(&path, e))?;
        Ok(completion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_ignores_line_endings_and_trailing_space() {
        assert_eq!(fixture_key("a  \r\nb\t\n\n"), fixture_key("a\nb"));
        assert_ne!(fixture_key("a\nb"), fixture_key("a\n b"));
        assert_eq!(fixture_key("").len(), 64);
    }

    #[test]
    fn replay_hit_miss_and_attempt_specific_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayBackend::new(dir.path());
        let req = CompletionRequest::new("prompt", 0);
        let err = replay.complete(&req).unwrap_err();
        let hash = fixture_key("prompt");
        assert!(err.to_string().contains(&hash), "{err}");

        std::fs::write(dir.path().join(format!("{hash}.txt")), "generic").unwrap();
        std::fs::write(dir.path().join(format!("{hash}.3.txt")), "third").unwrap();
        assert_eq!(replay.complete(&req).unwrap().text, "generic");
        assert_eq!(replay.complete(&CompletionRequest::new("prompt", 3)).unwrap().text, "third");
    }

    #[test]
    fn scripted_queue() {
        let s = ScriptedBackend::new(["{}"]);
        assert_eq!(s.complete(&CompletionRequest::new("p", 0)).unwrap().text, "{}");
        assert!(matches!(s.complete(&CompletionRequest::new("q", 0)), Err(LlmError::QueueEmpty)));
        assert_eq!(s.prompts(), ["p", "q"]);
    }

    #[test]
    fn recording_round_trips_through_replay() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingBackend::new(ScriptedBackend::new(["one", "two"]), dir.path()).unwrap();
        rec.complete(&CompletionRequest::new("p", 0)).unwrap();
        rec.complete(&CompletionRequest::new("p", 1)).unwrap();
        let replay = ReplayBackend::new(dir.path());
        assert_eq!(replay.complete(&CompletionRequest::new("p\r\n", 1)).unwrap().text, "two");
        assert_eq!(replay.complete(&CompletionRequest::new("p", 0)).unwrap().text, "one");
    }
}
