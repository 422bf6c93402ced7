use std::collections::BTreeMap;

use super::value::Value;
use crate::config::{Location, Transform, TriggerSpec};
use crate::road::{Route, SPAWN_HEIGHT_OFFSET};

/// Spawns further than this from the route centerline are rejected.
pub const MAX_SPAWN_LATERAL: f64 = 10.0;

/// Horizontal slack when checking that a spawn lies on (or beside) the route.
pub const ON_ROUTE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPlacement {
    pub spawn: Transform,
    pub target: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedTrigger {
    pub agent: String,
    pub spec: TriggerSpec,
}

/// What a placement program produced, after shape and geometry checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub route: Route,
    pub agents: BTreeMap<String, AgentPlacement>,
    pub trigger: Option<PlacedTrigger>,
    pub route_min_length: Option<f64>,
}

impl PlacementResult {
    /// Accepts either a record
    /// `{route, agents: {id: {spawn, target}}, trigger?, route_min_length?}`
    /// or a list `[route, subject_spawn, subject_target, lead_spawn?, lead_target?]`.
    pub fn from_value(v: &Value) -> Result<Self, String> {
        let result = match v {
            Value::Record(fields) => from_record(fields)?,
            Value::List(items) => from_list(items)?,
            other => {
                return Err(format!(
                    "program must return a record or a list, got a {}",
                    other.type_name()
                ))
            }
        };
        result.check_geometry()?;
        Ok(result)
    }

    fn check_geometry(&self) -> Result<(), String> {
        for (id, a) in &self.agents {
            if !a.spawn.is_finite() {
                return Err(format!("agent `{id}`: spawn has non-finite components"));
            }
            let ground = Location::new(a.spawn.x, a.spawn.y, a.spawn.z - SPAWN_HEIGHT_OFFSET);
            let (s, lateral) = self.route.project(ground);
            if lateral.abs() > MAX_SPAWN_LATERAL {
                return Err(format!(
                    "agent `{id}`: spawn is {:.2} m from the route, more than {MAX_SPAWN_LATERAL} m",
                    lateral.abs()
                ));
            }
            let (rebuilt, _) = self.route.offset_point(s, lateral).map_err(|e| e.to_string())?;
            let dxy = ((rebuilt.x - ground.x).powi(2) + (rebuilt.y - ground.y).powi(2)).sqrt();
            if dxy > ON_ROUTE_TOLERANCE {
                return Err(format!(
                    "agent `{id}`: spawn ({:.2}, {:.2}) does not lie along the selected route",
                    a.spawn.x, a.spawn.y
                ));
            }
        }
        Ok(())
    }
}

fn route_of(v: Option<&Value>) -> Result<Route, String> {
    match v {
        Some(Value::Route(r)) => Ok((**r).clone()),
        Some(other) => Err(format!("`route` must be a route, got a {}", other.type_name())),
        None => Err("result is missing `route`".into()),
    }
}

fn spawn_of(id: &str, v: &Value) -> Result<Transform, String> {
    match v {
        Value::Transform(t) => Ok(*t),
        other => Err(format!("agent `{id}`: spawn must be a transform, got a {}", other.type_name())),
    }
}

fn target_of(id: &str, v: &Value) -> Result<Location, String> {
    v.as_location()
        .ok_or_else(|| format!("agent `{id}`: target must be a location, got a {}", v.type_name()))
}

fn from_record(fields: &BTreeMap<String, Value>) -> Result<PlacementResult, String> {
    for key in fields.keys() {
        if !matches!(key.as_str(), "route" | "agents" | "trigger" | "route_min_length") {
            return Err(format!("unexpected field `{key}` in result"));
        }
    }
    let route = route_of(fields.get("route"))?;
    let agents_v = match fields.get("agents") {
        Some(Value::Record(a)) => a,
        Some(other) => return Err(format!("`agents` must be a record, got a {}", other.type_name())),
        None => return Err("result is missing `agents`".into()),
    };
    if agents_v.is_empty() {
        return Err("`agents` must place at least one agent".into());
    }
    let mut agents = BTreeMap::new();
    for (id, a) in agents_v.iter() {
        let Value::Record(a) = a else {
            return Err(format!("agent `{id}` must be a record with spawn and target"));
        };
        if let Some(k) = a.keys().find(|k| !matches!(k.as_str(), "spawn" | "target")) {
            return Err(format!("agent `{id}`: unexpected field `{k}`"));
        }
        let spawn = a.get("spawn").ok_or_else(|| format!("agent `{id}` is missing `spawn`"))?;
        let target = a.get("target").ok_or_else(|| format!("agent `{id}` is missing `target`"))?;
        agents.insert(
            id.clone(),
            AgentPlacement {
                spawn: spawn_of(id, spawn)?,
                target: target_of(id, target)?,
            },
        );
    }
    let trigger = match fields.get("trigger") {
        None => None,
        Some(Value::Record(t)) => Some(trigger_of(t, &agents)?),
        Some(other) => return Err(format!("`trigger` must be a record, got a {}", other.type_name())),
    };
    let route_min_length = match fields.get("route_min_length") {
        None => None,
        Some(Value::Number(n)) if *n > 0.0 => Some(*n),
        Some(other) => return Err(format!("`route_min_length` must be a positive number, got {other}")),
    };
    Ok(PlacementResult {
        route,
        agents,
        trigger,
        route_min_length,
    })
}

fn trigger_of(
    t: &BTreeMap<String, Value>,
    agents: &BTreeMap<String, AgentPlacement>,
) -> Result<PlacedTrigger, String> {
    if let Some(k) = t
        .keys()
        .find(|k| !matches!(k.as_str(), "agent" | "watched_agent" | "distance_threshold"))
    {
        return Err(format!("trigger: unexpected field `{k}`"));
    }
    let text = |key: &str| match t.get(key) {
        Some(Value::Str(s)) => Ok(s.to_string()),
        _ => Err(format!("trigger: `{key}` must be a string")),
    };
    let agent = text("agent")?;
    let watched = text("watched_agent")?;
    for id in [&agent, &watched] {
        if !agents.contains_key(id) {
            return Err(format!("trigger refers to `{id}`, which the result does not place"));
        }
    }
    if agent == watched {
        return Err("trigger: an agent cannot watch itself".into());
    }
    let distance_threshold = match t.get("distance_threshold") {
        Some(Value::Number(n)) if *n > 0.0 => *n,
        _ => return Err("trigger: `distance_threshold` must be a positive number".into()),
    };
    Ok(PlacedTrigger {
        agent,
        spec: TriggerSpec {
            watched_agent: watched,
            distance_threshold,
        },
    })
}

fn from_list(items: &[Value]) -> Result<PlacementResult, String> {
    if items.len() != 3 && items.len() != 5 {
        return Err(format!(
            "a list result must be [route, subject_spawn, subject_target] or add lead_spawn, lead_target; got {} elements",
            items.len()
        ));
    }
    let route = route_of(items.first())?;
    let mut agents = BTreeMap::new();
    for (id, pair) in ["subject", "lead"].iter().zip(items[1..].chunks(2)) {
        agents.insert(
            id.to_string(),
            AgentPlacement {
                spawn: spawn_of(id, &pair[0])?,
                target: target_of(id, &pair[1])?,
            },
        );
    }
    Ok(PlacementResult {
        route,
        agents,
        trigger: None,
        route_min_length: None,
    })
}
