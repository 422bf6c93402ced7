use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::selector::{Selector, SelectorError};
use crate::config::{normalize_angle, AgentSpec, SceneConfig, COMPARISON_EPSILON};
use crate::road::Route;

/// Default tolerance for numeric comparisons on document values.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Default tolerance, in meters or degrees, for geometric quantities.
pub const GEOMETRY_TOLERANCE: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed suite: {0}")]
    Format(String),
    #[error("assertion `{id}`: {message}")]
    Invalid { id: String, message: String },
    #[error("a suite needs at least one assertion")]
    Empty,
    #[error(transparent)]
    Selector(#[from] SelectorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredicateOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
    /// Case-insensitive substring.
    #[serde(rename = "~")]
    Contains,
    #[serde(rename = "!~")]
    NotContains,
}

impl PredicateOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            PredicateOp::Eq => "==",
            PredicateOp::Ne => "!=",
            PredicateOp::Ge => ">=",
            PredicateOp::Le => "<=",
            PredicateOp::Gt => ">",
            PredicateOp::Lt => "<",
            PredicateOp::Contains => "~",
            PredicateOp::NotContains => "!~",
        }
    }
}

impl fmt::Display for PredicateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Quantities computed from a document rather than read from it. Agent
/// arguments name an agent id, or a role when no agent has that id.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantity {
    /// Number of values a selector matches.
    Count(Selector),
    /// `image_size_x * image_size_y / 1e6` of the selected sensor.
    Megapixels(Selector),
    /// `1 / sensor_tick` of the selected sensor.
    Fps(Selector),
    /// Distance along the route from the first agent's spawn to the second's.
    Gap(String, String),
    /// Arc position of an agent's spawn on the route.
    Station(String),
    /// Signed lateral offset of an agent's spawn, positive to the right.
    Lateral(String),
    TargetStation(String),
    TargetLateral(String),
    /// Absolute heading difference of two spawns, in [0, 180] degrees.
    YawDiff(String, String),
    RouteLength,
    /// Difference between an agent's trigger distance and the distance at
    /// which it must start to reach the route centerline together with the
    /// agent it watches.
    SyncError(String),
}

impl Quantity {
    fn parse(text: &str) -> Result<Option<Self>, String> {
        let Some((name, rest)) = text.split_once('(') else {
            return Ok(match text {
                "route_length" => Some(Quantity::RouteLength),
                _ => None,
            });
        };
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("`{text}`: missing `)`"))?;
        let selector = || Selector::parse(args.trim()).map_err(|e| e.to_string());
        let agents: Vec<String> = args.split(',').map(|a| a.trim().to_string()).collect();
        let one = || match &agents[..] {
            [a] if !a.is_empty() => Ok(a.clone()),
            _ => Err(format!("`{name}` takes one agent")),
        };
        let two = || match &agents[..] {
            [a, b] if !a.is_empty() && !b.is_empty() => Ok((a.clone(), b.clone())),
            _ => Err(format!("`{name}` takes two agents")),
        };
        Ok(Some(match name.trim() {
            "count" => Quantity::Count(selector()?),
            "megapixels" => Quantity::Megapixels(selector()?),
            "fps" => Quantity::Fps(selector()?),
            "gap" => two().map(|(a, b)| Quantity::Gap(a, b))?,
            "yaw_diff" => two().map(|(a, b)| Quantity::YawDiff(a, b))?,
            "station" => Quantity::Station(one()?),
            "lateral" => Quantity::Lateral(one()?),
            "target_station" => Quantity::TargetStation(one()?),
            "target_lateral" => Quantity::TargetLateral(one()?),
            "sync_error" => Quantity::SyncError(one()?),
            other => return Err(format!("unknown quantity `{other}`")),
        }))
    }

    fn is_geometric(&self) -> bool {
        !matches!(self, Quantity::Count(_) | Quantity::Megapixels(_) | Quantity::Fps(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Path(Selector),
    Quantity(Quantity),
}

impl Target {
    pub fn parse(text: &str) -> Result<Self, String> {
        match Quantity::parse(text.trim())? {
            Some(q) => Ok(Target::Quantity(q)),
            None => Selector::parse(text.trim()).map(Target::Path).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssertionFile {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    requirement: Option<u32>,
    target: String,
    operator: PredicateOp,
    value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

/// One unit-test-like check on a generated artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub id: String,
    /// Requirement the assertion was transcribed from.
    pub requirement: Option<u32>,
    pub target_text: String,
    pub target: Target,
    pub operator: PredicateOp,
    pub value: Value,
    pub tolerance: Option<f64>,
}

impl Assertion {
    pub fn new(id: &str, target: &str, operator: PredicateOp, value: Value) -> Result<Self, SuiteError> {
        Self::from_file(AssertionFile {
            id: id.into(),
            requirement: None,
            target: target.into(),
            operator,
            value,
            tolerance: None,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = Some(tolerance);
        self
    }

    fn from_file(f: AssertionFile) -> Result<Self, SuiteError> {
        let invalid = |message: String| SuiteError::Invalid {
            id: f.id.clone(),
            message,
        };
        let target = Target::parse(&f.target).map_err(invalid)?;
        if let Some(t) = f.tolerance {
            if !(t.is_finite() && t >= 0.0) {
                return Err(invalid(format!("tolerance must be non-negative, got {t}")));
            }
        }
        let ok = match (&f.value, f.operator) {
            (Value::Number(_), PredicateOp::Contains | PredicateOp::NotContains) => false,
            (Value::Number(_), _) => true,
            (Value::String(_), op) => !matches!(op, PredicateOp::Ge | PredicateOp::Le | PredicateOp::Gt | PredicateOp::Lt),
            (Value::Bool(_), op) => matches!(op, PredicateOp::Eq | PredicateOp::Ne),
            _ => false,
        };
        if !ok {
            return Err(invalid(format!("operator {} cannot compare against {}", f.operator, f.value)));
        }
        if matches!(target, Target::Quantity(_)) && !f.value.is_number() {
            return Err(invalid("computed quantities are numbers".into()));
        }
        Ok(Self {
            id: f.id,
            requirement: f.requirement,
            target_text: f.target,
            target,
            operator: f.operator,
            value: f.value,
            tolerance: f.tolerance,
        })
    }

    fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(match &self.target {
            Target::Quantity(q) if q.is_geometric() => GEOMETRY_TOLERANCE,
            _ => DEFAULT_TOLERANCE,
        })
    }

    /// Evaluates against a document; problems locating the target fail the
    /// assertion rather than raising.
    pub fn evaluate(&self, doc: &Value) -> AssertionOutcome {
        let actual = match &self.target {
            Target::Path(sel) => match sel.select(doc)[..] {
                [v] => Ok(v.clone()),
                [] => Err(format!("nothing at `{sel}`")),
                ref many => Err(format!("`{sel}` matches {} values", many.len())),
            },
            Target::Quantity(q) => quantity(q, doc).map(Value::from),
        };
        let (passed, message) = match &actual {
            Err(e) => (false, e.clone()),
            Ok(a) => match compare(a, self.operator, &self.value, self.tolerance()) {
                Some(true) => (true, String::new()),
                Some(false) => (false, format!("{} is {a}, expected {} {}", self.target_text, self.operator, self.value)),
                None => (false, format!("{} is {a}, which cannot be compared with {}", self.target_text, self.value)),
            },
        };
        AssertionOutcome {
            id: self.id.clone(),
            passed,
            actual: actual.ok(),
            message,
        }
    }
}

fn compare(actual: &Value, op: PredicateOp, expected: &Value, tolerance: f64) -> Option<bool> {
    use PredicateOp::*;
    match (actual, expected) {
        (Value::Number(a), Value::Number(e)) => {
            let (a, e) = (a.as_f64()?, e.as_f64()?);
            let eps = COMPARISON_EPSILON;
            Some(match op {
                Eq => (a - e).abs() <= tolerance + eps,
                Ne => (a - e).abs() > tolerance + eps,
                Ge => a >= e - tolerance - eps,
                Le => a <= e + tolerance + eps,
                Gt => a > e + eps,
                Lt => a < e - eps,
                Contains | NotContains => return None,
            })
        }
        (Value::String(a), Value::String(e)) => {
            let contains = a.to_lowercase().contains(&e.to_lowercase());
            match op {
                Eq => Some(a == e),
                Ne => Some(a != e),
                Contains => Some(contains),
                NotContains => Some(!contains),
                _ => None,
            }
        }
        (Value::Bool(a), Value::Bool(e)) => match op {
            Eq => Some(a == e),
            Ne => Some(a != e),
            _ => None,
        },
        _ => None,
    }
}

fn single<'a>(sel: &Selector, doc: &'a Value) -> Result<&'a Value, String> {
    match sel.select(doc)[..] {
        [v] => Ok(v),
        [] => Err(format!("nothing at `{sel}`")),
        ref many => Err(format!("`{sel}` matches {} values", many.len())),
    }
}

fn attribute(sensor: &Value, key: &str) -> Result<f64, String> {
    sensor
        .get("attributes")
        .and_then(|a| a.get(key))
        .and_then(Value::as_f64)
        .ok_or_else(|| format!("sensor has no numeric `{key}`"))
}

struct Geometry {
    scene: SceneConfig,
    route: Route,
}

impl Geometry {
    fn from_doc(doc: &Value) -> Result<Self, String> {
        let scene_value = doc.get("scene").unwrap_or(doc);
        let scene: SceneConfig =
            serde_json::from_value(scene_value.clone()).map_err(|e| format!("not a scene: {e}"))?;
        let points = scene.route.clone().ok_or("the scene has no route")?;
        let route = Route::from_points(points.into_iter().map(Into::into).collect()).map_err(|e| e.to_string())?;
        Ok(Self { scene, route })
    }

    fn agent(&self, name: &str) -> Result<&AgentSpec, String> {
        self.scene
            .agent(name)
            .or_else(|| {
                let mut by_role = self.scene.agents.iter().filter(|a| a.role.as_str() == name);
                match (by_role.next(), by_role.next()) {
                    (Some(a), None) => Some(a),
                    _ => None,
                }
            })
            .ok_or_else(|| format!("no single agent `{name}`"))
    }

    fn spawn(&self, name: &str) -> Result<(f64, f64, f64), String> {
        let spawn = self.agent(name)?.spawn.ok_or_else(|| format!("agent `{name}` has no spawn"))?;
        let (s, lateral) = self.route.project(spawn.location());
        Ok((s, lateral, spawn.yaw))
    }

    fn target(&self, name: &str) -> Result<(f64, f64), String> {
        let target = self.agent(name)?.target.ok_or_else(|| format!("agent `{name}` has no target"))?;
        Ok(self.route.project(target))
    }
}

fn quantity(q: &Quantity, doc: &Value) -> Result<f64, String> {
    match q {
        Quantity::Count(sel) => return Ok(sel.select(doc).len() as f64),
        Quantity::Megapixels(sel) => {
            let s = single(sel, doc)?;
            return Ok(attribute(s, "image_size_x")? * attribute(s, "image_size_y")? / 1e6);
        }
        Quantity::Fps(sel) => {
            let tick = attribute(single(sel, doc)?, "sensor_tick")?;
            return if tick > 0.0 { Ok(1.0 / tick) } else { Err("sensor_tick is not positive".into()) };
        }
        _ => {}
    }
    let g = Geometry::from_doc(doc)?;
    Ok(match q {
        Quantity::Gap(a, b) => g.spawn(b)?.0 - g.spawn(a)?.0,
        Quantity::Station(a) => g.spawn(a)?.0,
        Quantity::Lateral(a) => g.spawn(a)?.1,
        Quantity::TargetStation(a) => g.target(a)?.0,
        Quantity::TargetLateral(a) => g.target(a)?.1,
        Quantity::YawDiff(a, b) => normalize_angle(g.spawn(a)?.2 - g.spawn(b)?.2).abs(),
        Quantity::RouteLength => g.route.length(),
        Quantity::SyncError(a) => {
            let agent = g.agent(a)?;
            let trigger = agent.trigger.as_ref().ok_or_else(|| format!("agent `{a}` has no trigger"))?;
            let watched = g.agent(&trigger.watched_agent)?;
            let (_, lateral, _) = g.spawn(a)?;
            if agent.target_speed <= 0.0 {
                return Err(format!("agent `{a}` does not move"));
            }
            // both speeds are km/h, so the ratio needs no conversion
            let needed = watched.target_speed * lateral.abs() / agent.target_speed;
            trigger.distance_threshold - needed
        }
        Quantity::Count(_) | Quantity::Megapixels(_) | Quantity::Fps(_) => unreachable!(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub id: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual: Option<Value>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub message: String,
}

/// A non-empty, ordered list of assertions with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub assertions: Vec<Assertion>,
}

impl Suite {
    pub fn new(assertions: Vec<Assertion>) -> Result<Self, SuiteError> {
        if assertions.is_empty() {
            return Err(SuiteError::Empty);
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &assertions {
            if !seen.insert(a.id.as_str()) {
                return Err(SuiteError::Invalid {
                    id: a.id.clone(),
                    message: "duplicate assertion id".into(),
                });
            }
        }
        Ok(Self { assertions })
    }

    pub fn from_json(text: &str) -> Result<Self, SuiteError> {
        let files: Vec<AssertionFile> = serde_json::from_str(text).map_err(|e| SuiteError::Format(e.to_string()))?;
        Self::new(files.into_iter().map(Assertion::from_file).collect::<Result<_, _>>()?)
    }

    pub fn load(path: &Path) -> Result<Self, SuiteError> {
        let text = std::fs::read_to_string(path).map_err(|source| SuiteError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn len(&self) -> usize {
        self.assertions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assertions.is_empty()
    }

    /// Ids of the assertions transcribed from a requirement.
    pub fn for_requirement(&self, id: u32) -> Vec<&str> {
        self.assertions
            .iter()
            .filter(|a| a.requirement == Some(id))
            .map(|a| a.id.as_str())
            .collect()
    }
}
