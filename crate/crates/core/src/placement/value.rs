use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use crate::config::{Location, Transform};
use crate::road::{AgentRotation, Route};

/// Runtime value of the placement language.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Str(Rc<str>),
    Rotation(AgentRotation),
    List(Rc<Vec<Value>>),
    Record(Rc<BTreeMap<String, Value>>),
    /// The road graph the program runs against; only ever bound to `graph`.
    Graph,
    Route(Rc<Route>),
    Transform(Transform),
    Location(Location),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Number(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Str(_) => "string",
            Value::Rotation(_) => "rotation",
            Value::List(_) => "list",
            Value::Record(_) => "record",
            Value::Graph => "graph",
            Value::Route(_) => "route",
            Value::Transform(_) => "transform",
            Value::Location(_) => "location",
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_route(&self) -> Option<&Rc<Route>> {
        match self {
            Value::Route(r) => Some(r),
            _ => None,
        }
    }

    /// A transform's location, or the location itself.
    pub fn as_location(&self) -> Option<Location> {
        match self {
            Value::Location(l) => Some(*l),
            Value::Transform(t) => Some(t.location()),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Rotation(r) => write!(f, "{r}"),
            Value::List(items) => write!(f, "<list of {}>", items.len()),
            Value::Record(fields) => {
                let keys: Vec<&str> = fields.keys().map(String::as_str).collect();
                write!(f, "{{{}}}", keys.join(", "))
            }
            Value::Graph => f.write_str("<graph>"),
            Value::Route(r) => write!(f, "<route {:.3} m>", r.length()),
            Value::Transform(t) => write!(f, "<transform {:.3}, {:.3}, {:.3} yaw {:.1}>", t.x, t.y, t.z, t.yaw),
            Value::Location(l) => write!(f, "<location {:.3}, {:.3}, {:.3}>", l.x, l.y, l.z),
        }
    }
}
