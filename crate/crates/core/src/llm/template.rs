use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::{LlmError, Pipeline, Style};

/// Placeholders a template of this pipeline and style may reference.
pub fn declared_placeholders(pipeline: Pipeline, style: Style) -> &'static [&'static str] {
    use Pipeline::*;
    use Style::*;
    match (pipeline, style) {
        (Vehicle, Simple) => &["vehicle_definition", "schema", "blueprints"],
        (Vehicle, Icl) => &["vehicle_definition", "schema", "blueprints", "example_requirements", "example_config"],
        (Vehicle, Cot) => &[
            "vehicle_definition",
            "schema",
            "blueprints",
            "example_requirements",
            "example_config",
            "reasoning_examples",
        ],
        (PreconditionStep1, Simple) => &["requirements", "schema", "weather_types", "blueprints"],
        (PreconditionStep1, _) => &[
            "requirements",
            "schema",
            "weather_types",
            "blueprints",
            "example_requirements",
            "example_config",
        ],
        (PreconditionStep2, Simple) => &["requirements", "scene", "tools", "grammar"],
        (PreconditionStep2, _) => &["requirements", "scene", "tools", "grammar", "example_requirements", "example_program"],
        (Postcondition, Simple) => &["requirements", "schema", "telemetry_options", "events"],
        (Postcondition, Icl) => &[
            "requirements",
            "schema",
            "telemetry_options",
            "events",
            "example_requirements",
            "example_config",
        ],
        (Postcondition, Cot) => &[
            "requirements",
            "schema",
            "telemetry_options",
            "events",
            "example_requirements",
            "example_config",
            "reasoning_examples",
        ],
        (RequirementSplit, _) => &["requirements"],
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Text(String),
    Slot(String),
}

/// A prompt body with `{name}` placeholders; `{{` and `}}` are literal braces.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub pipeline: Pipeline,
    pub style: Style,
    pub body: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn new(pipeline: Pipeline, style: Style, body: impl Into<String>) -> Result<Self, LlmError> {
        let body = body.into();
        let malformed = |message: String| LlmError::Template {
            pipeline,
            style,
            message,
        };
        let mut pieces = Vec::new();
        let mut text = String::new();
        let mut chars = body.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    text.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    text.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(ch) if ch.is_ascii_alphanumeric() || ch == '_' => name.push(ch),
                            _ => return Err(malformed(format!("unterminated or invalid placeholder `{{{name}`"))),
                        }
                    }
                    if name.is_empty() {
                        return Err(malformed("empty placeholder `{}`".into()));
                    }
                    if !declared_placeholders(pipeline, style).contains(&name.as_str()) {
                        return Err(LlmError::UndeclaredPlaceholder {
                            pipeline,
                            style,
                            placeholder: name,
                        });
                    }
                    pieces.push(Piece::Text(std::mem::take(&mut text)));
                    pieces.push(Piece::Slot(name));
                }
                '}' => return Err(malformed("unmatched `}` (write `}}` for a literal brace)".into())),
                c => text.push(c),
            }
        }
        pieces.push(Piece::Text(text));
        Ok(Self {
            pipeline,
            style,
            body,
            pieces,
        })
    }

    /// Placeholder names in order of first use.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(n) if seen.insert(n.as_str()) => Some(n.as_str()),
                _ => None,
            })
            .collect()
    }
}

/// Substitutes every placeholder; parameters the template does not use are ignored.
pub fn build_prompt(template: &PromptTemplate, params: &BTreeMap<String, String>) -> Result<String, LlmError> {
    let mut out = String::with_capacity(template.body.len());
    for piece in &template.pieces {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(name) => out.push_str(
                params
                    .get(name)
                    .ok_or_else(|| LlmError::MissingPlaceholder(name.clone()))?,
            ),
        }
    }
    Ok(out)
}

/// Templates and prompt examples stored as `prompts/<pipeline>/<style>.txt`
/// and `prompts/<pipeline>/examples/<name>`.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    dir: PathBuf,
}

impl PromptLibrary {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Loads the template for `style`, falling back to simpler styles when
    /// the pipeline has none for it.
    pub fn template(&self, pipeline: Pipeline, style: Style) -> Result<PromptTemplate, LlmError> {
        let mut current = Some(style);
        while let Some(st) = current {
            let path = self.dir.join(pipeline.as_str()).join(format!("{st}.txt"));
            match std::fs::read_to_string(&path) {
                Ok(body) => return PromptTemplate::new(pipeline, st, body),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => current = st.fallback(),
                Err(e) => return Err(LlmError::io(&path, e)),
            }
        }
        let path = self.dir.join(pipeline.as_str()).join("simple.txt");
        Err(LlmError::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no template for this pipeline"),
        ))
    }

    pub fn example(&self, pipeline: Pipeline, name: &str) -> Result<String, LlmError> {
        let path = self.dir.join(pipeline.as_str()).join("examples").join(name);
        std::fs::read_to_string(&path)
            .map(|text| text.trim_end().to_string())
            .map_err(|e| LlmError::io(&path, e))
    }
}
