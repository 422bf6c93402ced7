//! Prompt construction and completion backends.

mod backend;
mod extract;
mod live;
mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    fixture_key, normalize_prompt, Completion, CompletionBackend, CompletionRequest, RecordingBackend,
    ReplayBackend, ScriptedBackend,
};
pub use extract::{extract_artifact, ArtifactKind};
pub use live::{
    network_requests, HttpResponse, HttpTransport, LiveBackend, LiveConfig, ReqwestTransport, API_BASE_ENV,
    API_KEY_ENV, DEFAULT_TEMPERATURE, MAX_RETRIES,
};
pub use template::{build_prompt, declared_placeholders, PromptLibrary, PromptTemplate};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("missing prompt parameter `{0}`")]
    MissingPlaceholder(String),
    #[error("template {pipeline}/{style} uses undeclared placeholder `{placeholder}`")]
    UndeclaredPlaceholder {
        pipeline: Pipeline,
        style: Style,
        placeholder: String,
    },
    #[error("malformed template {pipeline}/{style}: {message}")]
    Template {
        pipeline: Pipeline,
        style: Style,
        message: String,
    },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no replay fixture for prompt {hash} in {dir}")]
    FixtureMiss { hash: String, dir: String },
    #[error("scripted backend has no responses left")]
    QueueEmpty,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected completion response: {0}")]
    Response(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("completion contained no artifact")]
    EmptyArtifact,
}

impl LlmError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        LlmError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Which generation step a prompt belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Vehicle,
    PreconditionStep1,
    PreconditionStep2,
    Postcondition,
    RequirementSplit,
}

impl Pipeline {
    pub const ALL: [Pipeline; 5] = [
        Pipeline::Vehicle,
        Pipeline::PreconditionStep1,
        Pipeline::PreconditionStep2,
        Pipeline::Postcondition,
        Pipeline::RequirementSplit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Pipeline::Vehicle => "vehicle",
            Pipeline::PreconditionStep1 => "precondition_step1",
            Pipeline::PreconditionStep2 => "precondition_step2",
            Pipeline::Postcondition => "postcondition",
            Pipeline::RequirementSplit => "requirement_split",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Prompt style compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Simple,
    Icl,
    Cot,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Simple, Style::Icl, Style::Cot];

    pub fn as_str(&self) -> &'static str {
        match self {
            Style::Simple => "simple",
            Style::Icl => "icl",
            Style::Cot => "cot",
        }
    }

    /// Next simpler style, used when a pipeline has no template for this one.
    pub fn fallback(&self) -> Option<Style> {
        match self {
            Style::Cot => Some(Style::Icl),
            Style::Icl => Some(Style::Simple),
            Style::Simple => None,
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Style {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Style::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown prompt style `{s}` (expected simple, icl or cot)"))
    }
}
