//! Configuration parts, their schemas, and canonical serialization.
//!
//! A scenario is assembled from three separately generated parts: the
//! vehicle definition, the scene pre-conditions, and the telemetry
//! post-conditions. Every part is JSON, checked against a strict JSON Schema
//! (unknown keys rejected) and then against the catalogs.

mod catalog;
mod numbers;
mod schema;
mod types;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub use catalog::{Catalogs, Unit};
pub use schema::{catalog_violations, validate, PartKind, PartSchema, SchemaSet, Violation};
pub use types::*;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid {part} schema: {message}")]
    Schema { part: PartKind, message: String },
    #[error("invalid catalog {path}: {message}")]
    Catalog { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} schema violation(s): {}", .0.len(), summarize(.0))]
    Schema(Vec<Violation>),
}

impl ParseError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ParseError::Schema(v) => v,
            ParseError::Syntax { .. } => &[],
        }
    }
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A typed configuration part.
#[derive(Debug, Clone, PartialEq)]
pub enum Part {
    Vehicle(VehicleConfig),
    Scene(SceneConfig),
    Checks(ChecksPart),
}

impl Part {
    pub fn kind(&self) -> PartKind {
        match self {
            Part::Vehicle(_) => PartKind::Vehicle,
            Part::Scene(_) => PartKind::Scene,
            Part::Checks(_) => PartKind::Checks,
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Part::Vehicle(v) => to_value(v),
            Part::Scene(s) => to_value(s),
            Part::Checks(c) => to_value(c),
        }
    }
}

/// Parses JSON text into a [`Value`], reporting syntax errors by position.
pub fn parse_json(text: &str) -> Result<Value, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn typed<T: DeserializeOwned>(value: Value) -> Result<T, ParseError> {
    serde_json::from_value(value)
        .map_err(|e| ParseError::Schema(vec![Violation::new("", e.to_string())]))
}

/// Parses a part document and checks it against its schema.
pub fn parse_part(text: &str, kind: PartKind, schemas: &SchemaSet) -> Result<Part, ParseError> {
    let value = parse_json(text)?;
    let violations = validate(&value, schemas.get(kind));
    if !violations.is_empty() {
        return Err(ParseError::Schema(violations));
    }
    value_to_part(value, kind)
}

fn value_to_part(value: Value, kind: PartKind) -> Result<Part, ParseError> {
    Ok(match kind {
        PartKind::Vehicle => Part::Vehicle(typed(value)?),
        PartKind::Scene => Part::Scene(typed(value)?),
        PartKind::Checks => Part::Checks(typed(value)?),
    })
}

/// Schema plus catalog validation in one place.
#[derive(Debug)]
pub struct Validator {
    pub schemas: SchemaSet,
    pub catalogs: Catalogs,
}

impl Validator {
    pub fn new(schemas: SchemaSet, catalogs: Catalogs) -> Self {
        Self { schemas, catalogs }
    }

    /// All violations of a part document; empty iff it can be used.
    pub fn check(&self, document: &Value, kind: PartKind) -> Vec<Violation> {
        let mut out = validate(document, self.schemas.get(kind));
        out.extend(catalog_violations(document, kind, &self.catalogs));
        out
    }

    pub fn parse(&self, text: &str, kind: PartKind) -> Result<Part, ParseError> {
        let value = parse_json(text)?;
        let violations = self.check(&value, kind);
        if !violations.is_empty() {
            return Err(ParseError::Schema(violations));
        }
        value_to_part(value, kind)
    }

    pub fn parse_vehicle(&self, text: &str) -> Result<VehicleConfig, ParseError> {
        match self.parse(text, PartKind::Vehicle)? {
            Part::Vehicle(v) => Ok(v),
            _ => unreachable!(),
        }
    }

    pub fn parse_scene(&self, text: &str) -> Result<SceneConfig, ParseError> {
        match self.parse(text, PartKind::Scene)? {
            Part::Scene(s) => Ok(s),
            _ => unreachable!(),
        }
    }

    pub fn parse_checks(&self, text: &str) -> Result<ChecksPart, ParseError> {
        match self.parse(text, PartKind::Checks)? {
            Part::Checks(c) => Ok(c),
            _ => unreachable!(),
        }
    }

    /// Part-wise validation of a merged document; paths are prefixed with
    /// the top-level key of the part.
    pub fn check_document(&self, doc: &ScenarioDocument) -> Vec<Violation> {
        let mut out = Vec::new();
        out.extend(
            self.check(&to_value(&doc.vehicle), PartKind::Vehicle)
                .into_iter()
                .map(|v| v.prefixed("/vehicle")),
        );
        out.extend(
            self.check(&to_value(&doc.scene), PartKind::Scene)
                .into_iter()
                .map(|v| v.prefixed("/scene")),
        );
        let checks = serde_json::json!({ "telemetry": to_value(&doc.checks) });
        out.extend(self.check(&checks, PartKind::Checks).into_iter().map(|mut v| {
            v.path = v.path.replacen("/telemetry", "/checks", 1);
            v
        }));
        out
    }
}

/// Serializes through [`Value`]; never fails for the types in this crate.
pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("configuration types always serialize")
}

fn sorted(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sorted(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

/// Canonical text of a JSON value: keys sorted, two-space indent, shortest
/// round-trip floats, trailing newline.
pub fn canonical_json(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(&sorted(value.clone()))
        .expect("JSON values always serialize");
    text.push('\n');
    text
}

/// Canonical text of a typed part. Identical inputs give identical bytes.
pub fn round_trip<T: Serialize>(part: &T) -> String {
    canonical_json(&to_value(part))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schemas() -> SchemaSet {
        SchemaSet::load(&crate::assets::repo_root().join("schemas")).unwrap()
    }

    #[test]
    fn empty_sensor_list_parses_and_round_trips() {
        let text = r#"{"id":"ego","blueprint":"vehicle.tesla.model3","sensors":[]}"#;
        let part = parse_part(text, PartKind::Vehicle, &schemas()).unwrap();
        let Part::Vehicle(v) = &part else { panic!() };
        assert!(v.sensors.is_empty());
        assert!(round_trip(v).contains("\"sensors\": []"));
    }

    #[test]
    fn syntax_errors_report_position() {
        let err = parse_part("{\n  \"id\": ,\n}", PartKind::Vehicle, &schemas()).unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"id":"ego","blueprint":"vehicle.tesla.model3","sensors":[],"color":"red"}"#;
        let err = parse_part(text, PartKind::Vehicle, &schemas()).unwrap_err();
        assert_eq!(err.violations().len(), 1);
        assert_eq!(err.violations()[0].path, "");
    }

    #[test]
    fn negative_sensor_tick_is_one_violation_at_its_path() {
        let doc = serde_json::json!({
            "id": "ego", "blueprint": "vehicle.tesla.model3",
            "sensors": [{"id": "cam", "blueprint": "sensor.camera.rgb",
                "transform": {"x": 0, "y": 0, "z": 1},
                "attributes": {"sensor_tick": -0.1}}]
        });
        let v = validate(&doc, schemas().get(PartKind::Vehicle));
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].path, "/sensors/0/attributes/sensor_tick");
    }

    #[test]
    fn boolean_value_needs_equality_operator() {
        let doc = serde_json::json!({"telemetry": [{
            "id": "c", "sensor": "collision", "begin": "simulation_start",
            "end": null, "operator": ">=", "value": true
        }]});
        let v = validate(&doc, schemas().get(PartKind::Checks));
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].path, "/telemetry/0/operator");
    }

    #[test]
    fn scene_requires_exactly_one_subject() {
        let agent = |id: &str, role: &str| {
            serde_json::json!({"id": id, "role": role, "blueprint": "vehicle.audi.tt", "target_speed": 0})
        };
        let s = schemas();
        let two = serde_json::json!({"agents": [agent("a", "subject"), agent("b", "subject")], "weather": "ClearNoon"});
        assert_eq!(validate(&two, s.get(PartKind::Scene)).len(), 1);
        let none = serde_json::json!({"agents": [agent("b", "lead")], "weather": "ClearNoon"});
        assert_eq!(validate(&none, s.get(PartKind::Scene)).len(), 1);
        let ok = serde_json::json!({"agents": [agent("a", "subject"), agent("b", "lead")], "weather": "ClearNoon"});
        assert!(validate(&ok, s.get(PartKind::Scene)).is_empty());
    }

    #[test]
    fn resolved_scene_requires_placement() {
        let doc = serde_json::json!({
            "agents": [{"id": "subject", "role": "subject", "blueprint": "vehicle.audi.tt", "target_speed": 20}],
            "weather": "ClearNoon", "resolved": true
        });
        let v = validate(&doc, schemas().get(PartKind::Scene));
        assert!(!v.is_empty());
        assert!(v.iter().all(|v| v.path == "/agents/0"), "{v:?}");
    }

    #[test]
    fn numbers_keep_their_written_form() {
        let text = r#"{"id":"ego","blueprint":"vehicle.tesla.model3","sensors":[{"id":"c","blueprint":"sensor.camera.rgb","transform":{"x":1,"y":0,"z":1.2},"attributes":{"sensor_tick":0.05,"image_size_x":2000}}]}"#;
        let Part::Vehicle(v) = parse_part(text, PartKind::Vehicle, &schemas()).unwrap() else {
            panic!()
        };
        let out = round_trip(&v);
        assert!(out.contains("\"sensor_tick\": 0.05"));
        assert!(out.contains("\"image_size_x\": 2000\n") || out.contains("\"image_size_x\": 2000,"));
        let reparsed: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(reparsed["sensors"][0]["attributes"]["sensor_tick"].as_f64(), Some(0.05));
    }
}
