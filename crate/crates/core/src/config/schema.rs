use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::catalog::{Catalogs, Unit};
use super::ConfigError;

/// Which of the three generated configuration parts a document is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartKind {
    Vehicle,
    Scene,
    Checks,
}

impl PartKind {
    pub const ALL: [PartKind; 3] = [PartKind::Vehicle, PartKind::Scene, PartKind::Checks];

    pub fn as_str(&self) -> &'static str {
        match self {
            PartKind::Vehicle => "vehicle",
            PartKind::Scene => "scene",
            PartKind::Checks => "checks",
        }
    }

    pub fn schema_file(&self) -> String {
        format!("{}.schema.json", self.as_str())
    }

    /// Guesses the part from the top-level keys of a document.
    pub fn detect(value: &Value) -> Option<PartKind> {
        let obj = value.as_object()?;
        if obj.contains_key("telemetry") {
            Some(PartKind::Checks)
        } else if obj.contains_key("agents") {
            Some(PartKind::Scene)
        } else if obj.contains_key("sensors") {
            Some(PartKind::Vehicle)
        } else {
            None
        }
    }
}

impl fmt::Display for PartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One reason a document does not conform. `path` is a JSON pointer into the
/// checked document and always names an existing node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.path = format!("{prefix}{}", self.path);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "/" } else { &self.path };
        write!(f, "{path}: {}", self.message)
    }
}

/// A compiled part schema together with its source text. The source text is
/// what gets injected into prompts.
pub struct PartSchema {
    kind: PartKind,
    source: String,
    validator: jsonschema::Validator,
}

impl fmt::Debug for PartSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartSchema").field("kind", &self.kind).finish_non_exhaustive()
    }
}

impl PartSchema {
    pub fn compile(kind: PartKind, source: &str) -> Result<Self, ConfigError> {
        let raw: Value = serde_json::from_str(source).map_err(|e| ConfigError::Schema {
            part: kind,
            message: e.to_string(),
        })?;
        let validator = jsonschema::draft202012::new(&raw).map_err(|e| ConfigError::Schema {
            part: kind,
            message: e.to_string(),
        })?;
        Ok(Self {
            kind,
            source: source.to_string(),
            validator,
        })
    }

    pub fn kind(&self) -> PartKind {
        self.kind
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// The three shipped part schemas.
#[derive(Debug)]
pub struct SchemaSet {
    schemas: BTreeMap<PartKind, PartSchema>,
}

impl SchemaSet {
    pub fn load(dir: &Path) -> Result<Self, ConfigError> {
        let mut schemas = BTreeMap::new();
        for kind in PartKind::ALL {
            let path = dir.join(kind.schema_file());
            let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                path: path.display().to_string(),
                source,
            })?;
            schemas.insert(kind, PartSchema::compile(kind, &text)?);
        }
        Ok(Self { schemas })
    }

    pub fn get(&self, kind: PartKind) -> &PartSchema {
        &self.schemas[&kind]
    }
}

/// Schema violations of `document` against `schema`; empty iff conformant.
pub fn validate(document: &Value, schema: &PartSchema) -> Vec<Violation> {
    let mut out: Vec<Violation> = schema
        .validator
        .iter_errors(document)
        .map(|e| Violation::new(e.instance_path().as_str(), e.to_string()))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Checks what the schemas cannot express: catalog membership, identifier
/// uniqueness, and references between fields of the same part.
pub fn catalog_violations(document: &Value, kind: PartKind, catalogs: &Catalogs) -> Vec<Violation> {
    let mut out = Vec::new();
    match kind {
        PartKind::Vehicle => vehicle_semantics(document, catalogs, &mut out),
        PartKind::Scene => scene_semantics(document, catalogs, &mut out),
        PartKind::Checks => checks_semantics(document, catalogs, &mut out),
    }
    out
}

fn str_at<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str)
}

fn items<'a>(doc: &'a Value, key: &str) -> impl Iterator<Item = (usize, &'a Value)> {
    doc.get(key)
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .enumerate()
}

fn known_blueprint(catalogs: &Catalogs, v: &Value, path: String, out: &mut Vec<Violation>) {
    if let Some(bp) = str_at(v, "blueprint") {
        if !catalogs.blueprints.contains(bp) {
            out.push(Violation::new(
                format!("{path}/blueprint"),
                format!("blueprint `{bp}` is not in the blueprint catalog"),
            ));
        }
    }
}

fn unique_ids<'a>(
    entries: impl Iterator<Item = (usize, &'a Value)>,
    prefix: &str,
    what: &str,
    out: &mut Vec<Violation>,
) {
    let mut seen = BTreeSet::new();
    for (i, v) in entries {
        if let Some(id) = str_at(v, "id") {
            if !seen.insert(id) {
                out.push(Violation::new(
                    format!("{prefix}/{i}/id"),
                    format!("duplicate {what} id `{id}`"),
                ));
            }
        }
    }
}

fn vehicle_semantics(doc: &Value, catalogs: &Catalogs, out: &mut Vec<Violation>) {
    known_blueprint(catalogs, doc, String::new(), out);
    for (i, sensor) in items(doc, "sensors") {
        known_blueprint(catalogs, sensor, format!("/sensors/{i}"), out);
    }
    unique_ids(items(doc, "sensors"), "/sensors", "sensor", out);
}

fn scene_semantics(doc: &Value, catalogs: &Catalogs, out: &mut Vec<Violation>) {
    if let Some(w) = str_at(doc, "weather") {
        if !catalogs.weather.contains(w) {
            out.push(Violation::new(
                "/weather",
                format!("weather `{w}` is not in the weather catalog"),
            ));
        }
    }
    let ids: BTreeSet<&str> = items(doc, "agents").filter_map(|(_, a)| str_at(a, "id")).collect();
    for (i, agent) in items(doc, "agents") {
        known_blueprint(catalogs, agent, format!("/agents/{i}"), out);
        if let Some(watched) = agent.get("trigger").and_then(|t| str_at(t, "watched_agent")) {
            if !ids.contains(watched) {
                out.push(Violation::new(
                    format!("/agents/{i}/trigger/watched_agent"),
                    format!("trigger watches unknown agent `{watched}`"),
                ));
            } else if str_at(agent, "id") == Some(watched) {
                out.push(Violation::new(
                    format!("/agents/{i}/trigger/watched_agent"),
                    "an agent cannot trigger on itself",
                ));
            }
        }
    }
    unique_ids(items(doc, "agents"), "/agents", "agent", out);
}

fn checks_semantics(doc: &Value, catalogs: &Catalogs, out: &mut Vec<Violation>) {
    for (i, check) in items(doc, "telemetry") {
        let base = format!("/telemetry/{i}");
        let unit = str_at(check, "sensor").and_then(|s| {
            let unit = catalogs.signals.get(s).copied();
            if unit.is_none() {
                out.push(Violation::new(
                    format!("{base}/sensor"),
                    format!("telemetry signal `{s}` is not available"),
                ));
            }
            unit
        });
        for key in ["begin", "end"] {
            if let Some(ev) = str_at(check, key) {
                if !catalogs.events.contains(ev) {
                    out.push(Violation::new(
                        format!("{base}/{key}"),
                        format!("event `{ev}` is not a predefined event"),
                    ));
                }
            }
        }
        if let (Some(unit), Some(value)) = (unit, check.get("value")) {
            let boolean_signal = unit == Unit::Boolean;
            if boolean_signal && value.is_number() {
                out.push(Violation::new(
                    format!("{base}/value"),
                    "boolean signal compared against a number",
                ));
            } else if !boolean_signal && value.is_boolean() {
                out.push(Violation::new(
                    format!("{base}/value"),
                    format!("signal measured in {unit} compared against a boolean"),
                ));
            }
        }
    }
    unique_ids(items(doc, "telemetry"), "/telemetry", "check", out);
}
