use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use super::value::Value;
use crate::config;
use crate::road::{self, RoadGraph};

/// What a tool parameter or return value means, beyond its runtime type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemanticType {
    Graph,
    Route,
    RouteList,
    Meters,
    Seconds,
    MetersPerSecond,
    KilometersPerHour,
    Rotation,
    Transform,
    Location,
}

impl SemanticType {
    pub fn describe(&self) -> &'static str {
        match self {
            SemanticType::Graph => "graph",
            SemanticType::Route => "route",
            SemanticType::RouteList => "list of routes",
            SemanticType::Meters => "meters",
            SemanticType::Seconds => "seconds",
            SemanticType::MetersPerSecond => "m/s",
            SemanticType::KilometersPerHour => "km/h",
            SemanticType::Rotation => "FORWARD|BACKWARD",
            SemanticType::Transform => "transform",
            SemanticType::Location => "location",
        }
    }

    pub fn accepts(&self, v: &Value) -> bool {
        match self {
            SemanticType::Graph => matches!(v, Value::Graph),
            SemanticType::Route => matches!(v, Value::Route(_)),
            SemanticType::RouteList => match v {
                Value::List(items) => items.iter().all(|i| matches!(i, Value::Route(_))),
                _ => false,
            },
            SemanticType::Meters
            | SemanticType::Seconds
            | SemanticType::MetersPerSecond
            | SemanticType::KilometersPerHour => matches!(v, Value::Number(_)),
            SemanticType::Rotation => matches!(v, Value::Rotation(_)),
            SemanticType::Transform => matches!(v, Value::Transform(_)),
            SemanticType::Location => matches!(v, Value::Location(_) | Value::Transform(_)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolSignature {
    pub name: String,
    pub params: Vec<(String, SemanticType)>,
    pub returns: SemanticType,
    pub doc: String,
}

impl fmt::Display for ToolSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(n, t)| format!("{n}: {}", t.describe()))
            .collect();
        write!(
            f,
            "{}({}) -> {}: {}",
            self.name,
            params.join(", "),
            self.returns.describe(),
            self.doc
        )
    }
}

/// What a tool can see while it runs: the road graph and nothing else.
pub struct ToolContext<'a> {
    pub graph: &'a RoadGraph,
}

pub type ToolFn = Arc<dyn Fn(&ToolContext<'_>, &[Value]) -> Result<Value, String> + Send + Sync>;

#[derive(Clone)]
pub struct Tool {
    pub signature: ToolSignature,
    pub func: ToolFn,
}

impl fmt::Debug for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tool").field("signature", &self.signature).finish_non_exhaustive()
    }
}

/// The set of functions a placement program may call.
#[derive(Debug, Clone, Default)]
pub struct ToolRegistry {
    tools: Vec<Tool>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("tool `{0}` is already registered")]
pub struct DuplicateTool(pub String);

impl ToolRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn register(&mut self, signature: ToolSignature, func: ToolFn) -> Result<(), DuplicateTool> {
        if self.get(&signature.name).is_some() {
            return Err(DuplicateTool(signature.name));
        }
        self.tools.push(Tool { signature, func });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tool> {
        self.tools.iter().find(|t| t.signature.name == name)
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn signatures(&self) -> impl Iterator<Item = &ToolSignature> {
        self.tools.iter().map(|t| &t.signature)
    }

    /// One line per tool, in registration order.
    pub fn doc(&self) -> String {
        self.signatures()
            .map(|s| format!("{s}\n"))
            .collect::<String>()
    }

    /// The road-graph tool library.
    pub fn standard() -> Self {
        use SemanticType::*;
        let mut r = Self::empty();
        let mut add = |name: &str, params: &[(&str, SemanticType)], returns, doc: &str, func: ToolFn| {
            r.register(
                ToolSignature {
                    name: name.into(),
                    params: params.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
                    returns,
                    doc: doc.into(),
                },
                func,
            )
            .expect("standard tool names are unique");
        };
        add(
            "get_routes_straight",
            &[("graph", Graph)],
            RouteList,
            "all maximal straight routes of the road graph, ordered by their first node id",
            Arc::new(|ctx, _| Ok(routes_value(road::get_routes_straight(ctx.graph)))),
        );
        add(
            "filter_routes_by_length",
            &[("routes", RouteList), ("min_length", Meters)],
            RouteList,
            "the routes at least min_length long, order preserved",
            Arc::new(|_, args| {
                let routes = route_list(&args[0]);
                let min = num(&args[1]);
                if min < 0.0 {
                    return Err(format!("min_length must not be negative, got {min}"));
                }
                Ok(routes_value(road::filter_routes_by_length(&routes, min)))
            }),
        );
        add(
            "create_spawnpoint",
            &[("route", Route), ("s", Meters), ("rotation", Rotation)],
            Transform,
            "spawn transform s meters along the route, facing along it (FORWARD) or against it (BACKWARD)",
            Arc::new(|_, args| {
                let rotation = match &args[2] {
                    Value::Rotation(r) => *r,
                    _ => unreachable!("checked by signature"),
                };
                route(&args[0])
                    .create_spawnpoint(num(&args[1]), rotation)
                    .map(Value::Transform)
                    .map_err(|e| e.to_string())
            }),
        );
        add(
            "create_crossing_spawnpoint",
            &[("route", Route), ("s", Meters), ("lateral", Meters)],
            Transform,
            "spawn transform lateral meters to the right (negative: left) of the point s meters along the route, facing across the route towards it",
            Arc::new(|_, args| {
                let lateral = num(&args[2]);
                if lateral == 0.0 {
                    return Err("lateral offset of a crossing spawnpoint must not be 0".into());
                }
                let (p, heading) = route(&args[0])
                    .offset_point(num(&args[1]), lateral)
                    .map_err(|e| e.to_string())?;
                let facing = if lateral > 0.0 { heading - 90.0 } else { heading + 90.0 };
                let lifted = config::Location::new(p.x, p.y, p.z + road::SPAWN_HEIGHT_OFFSET);
                Ok(Value::Transform(config::Transform::at(lifted, facing)))
            }),
        );
        add(
            "route_point",
            &[("route", Route), ("s", Meters), ("lateral", Meters)],
            Location,
            "location s meters along the route, shifted lateral meters to the right (negative: left)",
            Arc::new(|_, args| {
                route(&args[0])
                    .offset_point(num(&args[1]), num(&args[2]))
                    .map(|(p, _)| Value::Location(p))
                    .map_err(|e| e.to_string())
            }),
        );
        add(
            "route_length",
            &[("route", Route)],
            Meters,
            "total length of the route",
            Arc::new(|_, args| Ok(Value::Number(route(&args[0]).length()))),
        );
        add(
            "ttc_to_distance",
            &[("ttc", Seconds), ("v_subject", MetersPerSecond), ("v_lead", MetersPerSecond)],
            Meters,
            "gap that closes in ttc seconds when the subject drives v_subject behind a lead driving v_lead",
            Arc::new(|_, args| {
                road::ttc_to_distance(num(&args[0]), num(&args[1]), num(&args[2]))
                    .map(Value::Number)
                    .map_err(|e| e.to_string())
            }),
        );
        add(
            "crossing_trigger_distance",
            &[("v_subject", MetersPerSecond), ("v_crosser", MetersPerSecond), ("lateral_offset", Meters)],
            Meters,
            "subject's remaining distance to the collision point at which a crosser starting lateral_offset meters away must start so both arrive together",
            Arc::new(|_, args| {
                road::crossing_trigger_distance(num(&args[0]), num(&args[1]), num(&args[2]))
                    .map(Value::Number)
                    .map_err(|e| e.to_string())
            }),
        );
        add(
            "kmh_to_ms",
            &[("speed", KilometersPerHour)],
            MetersPerSecond,
            "converts km/h to m/s",
            Arc::new(|_, args| Ok(Value::Number(road::kmh_to_ms(num(&args[0]))))),
        );
        r
    }
}

fn num(v: &Value) -> f64 {
    v.as_number().expect("checked by signature")
}

fn route(v: &Value) -> &road::Route {
    v.as_route().expect("checked by signature")
}

fn route_list(v: &Value) -> Vec<road::Route> {
    match v {
        Value::List(items) => items
            .iter()
            .map(|i| route(i).clone())
            .collect(),
        _ => unreachable!("checked by signature"),
    }
}

fn routes_value(routes: Vec<road::Route>) -> Value {
    Value::List(Rc::new(routes.into_iter().map(|r| Value::Route(Rc::new(r))).collect()))
}
