//! Paths into JSON documents, e.g. `sensors[id~rear][id!~side].transform.yaw`.
//!
//! A path is a dot-separated list of keys. Each key may be followed by
//! filters that narrow an array down: `[3]` picks an index, `[k=v]` and
//! `[k!=v]` compare a (dotted) field with a literal, `[k~v]` and `[k!~v]`
//! test for a case-insensitive substring. A path can match any number of
//! values.

use std::fmt;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid selector `{selector}`: {message}")]
pub struct SelectorError {
    pub selector: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FilterOp {
    Eq,
    Ne,
    Contains,
    NotContains,
}

#[derive(Debug, Clone, PartialEq)]
enum Filter {
    Index(i64),
    Field { path: Vec<String>, op: FilterOp, literal: String },
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    key: String,
    filters: Vec<Filter>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    source: String,
    segments: Vec<Segment>,
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Selector {
    pub fn parse(source: &str) -> Result<Self, SelectorError> {
        let err = |message: String| SelectorError {
            selector: source.to_string(),
            message,
        };
        let mut segments = Vec::new();
        let mut chars = source.chars().peekable();
        loop {
            let mut key = String::new();
            while let Some(&c) = chars.peek() {
                if c == '.' || c == '[' {
                    break;
                }
                if !(c.is_ascii_alphanumeric() || c == '_') {
                    return Err(err(format!("unexpected `{c}` in key")));
                }
                key.push(c);
                chars.next();
            }
            if key.is_empty() {
                return Err(err("empty key".into()));
            }
            let mut filters = Vec::new();
            while chars.peek() == Some(&'[') {
                chars.next();
                let mut body = String::new();
                loop {
                    match chars.next() {
                        Some(']') => break,
                        Some(c) => body.push(c),
                        None => return Err(err("unterminated `[`".into())),
                    }
                }
                filters.push(parse_filter(&body).map_err(err)?);
            }
            segments.push(Segment { key, filters });
            match chars.next() {
                None => break,
                Some('.') => continue,
                Some(c) => return Err(err(format!("unexpected `{c}`"))),
            }
        }
        Ok(Self {
            source: source.to_string(),
            segments,
        })
    }

    /// Every value the path reaches, in document order.
    pub fn select<'a>(&self, root: &'a Value) -> Vec<&'a Value> {
        let mut current = vec![root];
        for seg in &self.segments {
            let mut next = Vec::new();
            for v in current {
                if let Some(child) = v.get(&seg.key) {
                    next.extend(apply_filters(child, &seg.filters));
                }
            }
            current = next;
        }
        current
    }
}

fn parse_filter(body: &str) -> Result<Filter, String> {
    let body = body.trim();
    if let Ok(i) = body.parse::<i64>() {
        return Ok(Filter::Index(i));
    }
    let at = body
        .find(['=', '~', '!'])
        .ok_or_else(|| format!("filter `[{body}]` needs an index or one of = != ~ !~"))?;
    let (op, len) = match &body[at..] {
        r if r.starts_with("!=") => (FilterOp::Ne, 2),
        r if r.starts_with("!~") => (FilterOp::NotContains, 2),
        r if r.starts_with('=') => (FilterOp::Eq, 1),
        r if r.starts_with('~') => (FilterOp::Contains, 1),
        _ => return Err(format!("filter `[{body}]`: `!` must be followed by = or ~")),
    };
    let key = body[..at].trim();
    let literal = body[at + len..].trim().trim_matches('"').to_string();
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
        return Err(format!("invalid filter key `{key}`"));
    }
    Ok(Filter::Field {
        path: key.split('.').map(str::to_string).collect(),
        op,
        literal,
    })
}

fn apply_filters<'a>(value: &'a Value, filters: &[Filter]) -> Vec<&'a Value> {
    if filters.is_empty() {
        return vec![value];
    }
    let Value::Array(items) = value else {
        return vec![];
    };
    let mut selected: Vec<&Value> = items.iter().collect();
    for f in filters {
        selected = match f {
            Filter::Index(i) => {
                let idx = if *i < 0 { selected.len() as i64 + i } else { *i };
                usize::try_from(idx)
                    .ok()
                    .and_then(|i| selected.get(i).copied())
                    .into_iter()
                    .collect()
            }
            Filter::Field { path, op, literal } => selected
                .into_iter()
                .filter(|item| {
                    let field = path.iter().try_fold(*item, |v, k| v.get(k));
                    field_matches(field, *op, literal)
                })
                .collect(),
        };
    }
    selected
}

fn field_matches(field: Option<&Value>, op: FilterOp, literal: &str) -> bool {
    let text = match field {
        Some(Value::String(s)) => s.clone(),
        Some(v @ (Value::Number(_) | Value::Bool(_))) => v.to_string(),
        _ => return matches!(op, FilterOp::Ne | FilterOp::NotContains),
    };
    let equal = match (field.and_then(Value::as_f64), literal.parse::<f64>()) {
        (Some(a), Ok(b)) => (a - b).abs() <= 1e-9,
        _ => text == literal,
    };
    let contains = text.to_lowercase().contains(&literal.to_lowercase());
    match op {
        FilterOp::Eq => equal,
        FilterOp::Ne => !equal,
        FilterOp::Contains => contains,
        FilterOp::NotContains => !contains,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc() -> Value {
        json!({"id": "ego", "sensors": [
            {"id": "rear_camera", "transform": {"yaw": 180}, "attributes": {"range": 10}},
            {"id": "left_rear_side", "transform": {"yaw": -120}},
            {"id": "Front_Wide", "transform": {"yaw": 0.0}},
        ]})
    }

    fn sel(s: &str) -> Vec<Value> {
        Selector::parse(s).unwrap().select(&doc()).into_iter().cloned().collect()
    }

    #[test]
    fn keys_and_filters() {
        assert_eq!(sel("id"), [json!("ego")]);
        assert_eq!(sel("sensors[id~rear].id").len(), 2);
        assert_eq!(sel("sensors[id~rear][id!~side].attributes.range"), [json!(10)]);
        assert_eq!(sel("sensors[transform.yaw=180].id"), [json!("rear_camera")]);
        assert_eq!(sel("sensors[transform.yaw=0].id"), [json!("Front_Wide")]);
        assert_eq!(sel("sensors[id~wide].id"), [json!("Front_Wide")]);
        assert_eq!(sel("sensors[-1].id"), [json!("Front_Wide")]);
        assert_eq!(sel("sensors[id!=rear_camera]").len(), 2);
        assert!(sel("sensors[id~lidar].id").is_empty());
        assert!(sel("missing.path").is_empty());
        assert_eq!(sel("sensors").len(), 1);
        assert!(sel("sensors[id=a~b]").is_empty());
    }

    #[test]
    fn malformed_selectors() {
        for bad in ["", "a..b", "a[", "a[x]", "a b", "a[=1]"] {
            assert!(Selector::parse(bad).is_err(), "{bad}");
        }
    }
}
