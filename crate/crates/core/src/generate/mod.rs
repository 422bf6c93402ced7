//! The three generation pipelines: vehicle, pre-conditions, post-conditions.
//!
//! A failed completion, extraction or validation never aborts a pipeline;
//! it is recorded on the attempt so that grading can count it.

mod checks;
mod scene;
mod vehicle;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::assets::Assets;
use crate::config::GenerationMeta;
use crate::llm::{
    build_prompt, extract_artifact, ArtifactKind, CompletionBackend, CompletionRequest, Pipeline, Style,
};

pub use crate::dataset::shuffle_requirements;
pub use checks::{generate_postconditions, ChecksOutcome};
pub use scene::{generate_preconditions, SceneOutcome};
pub use vehicle::{generate_vehicle, generate_vehicle_grouped, parse_split, GroupedOutcome, VehicleOutcome, VEHICLE_GROUP};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error("no requirements to generate from")]
    NoRequirements,
}

/// One prompt/response exchange and what came of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationAttempt {
    pub pipeline: Pipeline,
    pub style: Style,
    pub attempt: usize,
    pub prompt: String,
    pub raw_response: Option<String>,
    pub artifact: Option<String>,
    pub errors: Vec<String>,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Wall-clock time; left out of serialized output so reports stay reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl GenerationAttempt {
    pub fn succeeded(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn meta(&self) -> GenerationMeta {
        GenerationMeta {
            style: self.style.as_str().into(),
            backend: self.backend.clone(),
            attempt: self.attempt,
            model: self.model.clone(),
            temperature: self.temperature,
        }
    }
}

/// What a pipeline run needs besides its requirements.
#[derive(Clone, Copy)]
pub struct GenContext<'a> {
    pub assets: &'a Assets,
    pub backend: &'a dyn CompletionBackend,
}

impl<'a> GenContext<'a> {
    pub fn new(assets: &'a Assets, backend: &'a dyn CompletionBackend) -> Self {
        Self { assets, backend }
    }

    /// Builds the prompt, completes it and extracts the artifact. The
    /// returned attempt holds an artifact whenever extraction succeeded.
    pub(crate) fn exchange(
        &self,
        pipeline: Pipeline,
        style: Style,
        attempt: usize,
        kind: ArtifactKind,
        params: &dyn Fn(&str) -> Option<Result<String, String>>,
    ) -> GenerationAttempt {
        let started = Instant::now();
        let mut record = GenerationAttempt {
            pipeline,
            style,
            attempt,
            prompt: String::new(),
            raw_response: None,
            artifact: None,
            errors: Vec::new(),
            backend: self.backend.id(),
            model: None,
            temperature: None,
            elapsed: Duration::ZERO,
        };
        let prompt = self
            .assets
            .prompts
            .template(pipeline, style)
            .map_err(|e| e.to_string())
            .and_then(|template| {
                let mut map = BTreeMap::new();
                for name in template.placeholders() {
                    if let Some(value) = params(name) {
                        map.insert(name.to_string(), value?);
                    }
                }
                build_prompt(&template, &map).map_err(|e| e.to_string())
            });
        match prompt {
            Err(e) => record.errors.push(format!("prompt: {e}")),
            Ok(prompt) => {
                record.prompt = prompt;
                match self.backend.complete(&CompletionRequest::new(record.prompt.clone(), attempt)) {
                    Err(e) => record.errors.push(format!("completion: {e}")),
                    Ok(c) => {
                        record.model = c.model;
                        record.temperature = c.temperature;
                        match extract_artifact(&c.text, kind) {
                            Ok(a) => record.artifact = Some(a),
                            Err(e) => record.errors.push(format!("extraction: {e}")),
                        }
                        record.raw_response = Some(c.text);
                    }
                }
            }
        }
        record.elapsed = started.elapsed();
        record
    }
}

/// Reads a file of prompt examples for a pipeline, as a prompt parameter.
pub(crate) fn example(ctx: &GenContext<'_>, pipeline: Pipeline, name: &str) -> Option<Result<String, String>> {
    Some(ctx.assets.prompts.example(pipeline, name).map_err(|e| e.to_string()))
}
