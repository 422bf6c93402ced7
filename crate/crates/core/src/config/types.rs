use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::numbers;

/// Classification of a requirement by how it maps onto configuration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementCategory {
    /// Maps straight onto one configuration parameter.
    Direct,
    /// Needs a transformation (e.g. FPS to sensor tick) but no outside context.
    Indirect,
    /// Needs outside context such as the vehicle bounding box or the road graph.
    Abstract,
}

/// One natural-language requirement of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requirement {
    pub id: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<RequirementCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_key: Option<String>,
}

impl Requirement {
    pub fn new(id: u32, text: impl Into<String>) -> Self {
        Self {
            id,
            text: text.into(),
            category: None,
            group_key: None,
        }
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.id, self.text)
    }
}

/// World or vehicle-local position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Location) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2)).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Location {
    fn from(p: [f64; 3]) -> Self {
        Self::new(p[0], p[1], p[2])
    }
}

/// Location plus rotation. For sensors the frame is vehicle-local: x forward,
/// y right, z up from the bottom of the bounding box. Angles are degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transform {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub roll: f64,
}

impl Transform {
    pub fn at(location: Location, yaw: f64) -> Self {
        Self {
            x: location.x,
            y: location.y,
            z: location.z,
            pitch: 0.0,
            yaw: normalize_angle(yaw),
            roll: 0.0,
        }
    }

    pub fn location(&self) -> Location {
        Location::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.z, self.pitch, self.yaw, self.roll]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Maps an angle in degrees onto (-180, 180].
pub fn normalize_angle(deg: f64) -> f64 {
    let mut a = deg % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    // avoid emitting -0.0
    if a == 0.0 {
        0.0
    } else {
        a
    }
}

/// Vehicle bounding box in meters. Only ever appears in requirements; it is
/// the context for placing sensors and is never part of a generated config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub length_x: f64,
    pub width_y: f64,
    pub height_z: f64,
}

impl BoundingBox {
    pub fn new(length_x: f64, width_y: f64, height_z: f64) -> Option<Self> {
        let ok = [length_x, width_y, height_z]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        ok.then_some(Self {
            length_x,
            width_y,
            height_z,
        })
    }

    /// Vehicle-local x of a point `distance` meters behind the front face.
    pub fn x_from_front(&self, distance: f64) -> f64 {
        self.length_x / 2.0 - distance
    }

    /// Vehicle-local x of a point `distance` meters ahead of the rear face.
    pub fn x_from_rear(&self, distance: f64) -> f64 {
        -self.length_x / 2.0 + distance
    }

    /// Lateral offset of the left (negative) and right (positive) side.
    pub fn side_y(&self, left: bool) -> f64 {
        if left {
            -self.width_y / 2.0
        } else {
            self.width_y / 2.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub id: String,
    pub blueprint: String,
    pub transform: Transform,
    #[serde(default, with = "numbers::map")]
    pub attributes: BTreeMap<String, f64>,
}

impl SensorSpec {
    pub fn attribute(&self, key: &str) -> Option<f64> {
        self.attributes.get(key).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub id: String,
    pub blueprint: String,
    pub sensors: Vec<SensorSpec>,
}

impl VehicleConfig {
    pub fn sensor(&self, id: &str) -> Option<&SensorSpec> {
        self.sensors.iter().find(|s| s.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Subject,
    Lead,
    Pedestrian,
}

impl AgentRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            AgentRole::Subject => "subject",
            AgentRole::Lead => "lead",
            AgentRole::Pedestrian => "pedestrian",
        }
    }
}

/// Starts an agent once the watched agent is `distance_threshold` meters
/// away from the collision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSpec {
    pub watched_agent: String,
    pub distance_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    pub role: AgentRole,
    pub blueprint: String,
    /// km/h
    #[serde(with = "numbers::plain")]
    pub target_speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawn: Option<Transform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Location>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<TriggerSpec>,
}

impl AgentSpec {
    pub fn is_placed(&self) -> bool {
        self.spawn.is_some() && self.target.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub agents: Vec<AgentSpec>,
    pub weather: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_min_length: Option<f64>,
    /// Waypoints of the selected route, filled in by placement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement_program: Option<String>,
    #[serde(default)]
    pub resolved: bool,
}

impl SceneConfig {
    pub fn agent(&self, id: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn subjects(&self) -> impl Iterator<Item = &AgentSpec> {
        self.agents.iter().filter(|a| a.role == AgentRole::Subject)
    }

    pub fn all_placed(&self) -> bool {
        self.agents.iter().all(AgentSpec::is_placed)
    }
}

pub const COMPARISON_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
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
}

impl Operator {
    pub fn symbol(&self) -> &'static str {
        match self {
            Operator::Eq => "==",
            Operator::Ne => "!=",
            Operator::Ge => ">=",
            Operator::Le => "<=",
            Operator::Gt => ">",
            Operator::Lt => "<",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "==" => Operator::Eq,
            "!=" => Operator::Ne,
            ">=" => Operator::Ge,
            "<=" => Operator::Le,
            ">" => Operator::Gt,
            "<" => Operator::Lt,
            _ => return None,
        })
    }

    pub fn is_equality(&self) -> bool {
        matches!(self, Operator::Eq | Operator::Ne)
    }

    /// Numeric comparison; equality operators compare within `tolerance`.
    /// Every operator allows [`COMPARISON_EPSILON`] of round-off, so unit
    /// conversion never changes a verdict.
    pub fn compare(&self, actual: f64, expected: f64, tolerance: f64) -> bool {
        let eps = COMPARISON_EPSILON;
        let close = (actual - expected).abs() <= tolerance + eps;
        match self {
            Operator::Eq => close,
            Operator::Ne => !close,
            Operator::Ge => actual >= expected - eps,
            Operator::Le => actual <= expected + eps,
            Operator::Gt => actual > expected + eps,
            Operator::Lt => actual < expected - eps,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Expected value of a telemetry check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckValue {
    Bool(bool),
    Number(#[serde(with = "numbers::plain")] f64),
}

impl fmt::Display for CheckValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckValue::Bool(b) => write!(f, "{b}"),
            CheckValue::Number(n) => write!(f, "{n}"),
        }
    }
}

/// A post-condition on one telemetry signal, evaluated at the `begin` event
/// (when `end` is null) or over the window between `begin` and `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryCheck {
    pub id: String,
    pub sensor: String,
    pub begin: String,
    #[serde(default)]
    pub end: Option<String>,
    pub operator: Operator,
    pub value: CheckValue,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "numbers::option")]
    pub tolerance: Option<f64>,
}

/// The post-condition part as generated: `{"telemetry": [...]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksPart {
    pub telemetry: Vec<TelemetryCheck>,
}

/// How one part of a scenario document was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationMeta {
    pub style: String,
    pub backend: String,
    pub attempt: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub vehicle: VehicleConfig,
    pub scene: SceneConfig,
    pub checks: Vec<TelemetryCheck>,
    #[serde(default)]
    pub provenance: BTreeMap<String, GenerationMeta>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_normalize_into_half_open_interval() {
        assert_eq!(normalize_angle(180.0), 180.0);
        assert_eq!(normalize_angle(-180.0), 180.0);
        assert_eq!(normalize_angle(540.0), 180.0);
        assert_eq!(normalize_angle(-190.0), 170.0);
        assert_eq!(normalize_angle(360.0), 0.0);
        assert!(normalize_angle(-360.0).is_sign_positive());
    }

    #[test]
    fn bounding_box_mount_points() {
        let bb = BoundingBox::new(5.5, 2.2, 2.0).unwrap();
        assert!((bb.x_from_front(1.0) - 1.75).abs() < 1e-12);
        assert!((bb.x_from_rear(0.0) + 2.75).abs() < 1e-12);
        assert_eq!(bb.side_y(true), -1.1);
        assert!(BoundingBox::new(0.0, 1.0, 1.0).is_none());
    }

    #[test]
    fn operator_equality_uses_tolerance() {
        assert!(Operator::Eq.compare(19.95, 20.0, 0.1));
        assert!(!Operator::Eq.compare(19.8, 20.0, 0.1));
        assert!(Operator::Ne.compare(19.8, 20.0, 0.1));
        assert!(Operator::Ge.compare(5.0, 5.0, 0.0));
        assert!(!Operator::Gt.compare(5.0, 5.0, 10.0));
    }
}
