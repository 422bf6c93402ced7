use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RoadError;
use crate::config::Location;

/// One directed lane segment between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub polyline: Vec<[f64; 3]>,
    pub lane_width: f64,
    pub straight: bool,
}

impl Edge {
    pub fn points(&self) -> impl Iterator<Item = Location> + '_ {
        self.polyline.iter().map(|p| Location::from(*p))
    }

    /// Heading in degrees of each polyline segment, measured in the ground
    /// plane from +x towards +y.
    pub fn segment_headings(&self) -> Vec<f64> {
        self.polyline
            .windows(2)
            .map(|w| heading_deg(w[0], w[1]))
            .collect()
    }
}

pub(crate) fn heading_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    (b[1] - a[1]).atan2(b[0] - a[0]).to_degrees()
}

/// Absolute heading change between two headings, in [0, 180].
pub(crate) fn turn_deg(from: f64, to: f64) -> f64 {
    let mut d = (to - from) % 360.0;
    if d > 180.0 {
        d -= 360.0;
    } else if d < -180.0 {
        d += 360.0;
    }
    d.abs()
}

/// Lane-segment graph of the road network. Immutable once loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadGraph {
    pub nodes: BTreeMap<String, [f64; 3]>,
    pub edges: Vec<Edge>,
}

impl RoadGraph {
    pub fn load(path: &Path) -> Result<Self, RoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| RoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, RoadError> {
        let graph: RoadGraph =
            serde_json::from_str(text).map_err(|e| RoadError::Format(e.to_string()))?;
        graph.validate()?;
        Ok(graph)
    }

    pub fn validate(&self) -> Result<(), RoadError> {
        if self.nodes.is_empty() {
            return Err(RoadError::Format("graph has no nodes".into()));
        }
        for (id, p) in &self.nodes {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(RoadError::Invariant(format!("node `{id}` has a non-finite coordinate")));
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            for end in [&e.from, &e.to] {
                if !self.nodes.contains_key(end) {
                    return Err(RoadError::Invariant(format!(
                        "edge {i} references unknown node `{end}`"
                    )));
                }
            }
            if e.polyline.len() < 2 {
                return Err(RoadError::Format(format!(
                    "edge {i} ({} -> {}) polyline needs at least 2 points",
                    e.from, e.to
                )));
            }
            if e.polyline.iter().flatten().any(|v| !v.is_finite()) {
                return Err(RoadError::Invariant(format!("edge {i} has a non-finite point")));
            }
            if e.polyline.windows(2).any(|w| w[0] == w[1]) {
                return Err(RoadError::Invariant(format!(
                    "edge {i} polyline repeats a point"
                )));
            }
            if !(e.lane_width.is_finite() && e.lane_width > 0.0) {
                return Err(RoadError::Invariant(format!("edge {i} lane width must be positive")));
            }
        }
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<Location> {
        self.nodes.get(id).map(|p| Location::from(*p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turn_wraps_around() {
        assert!((turn_deg(179.5, -179.5) - 1.0).abs() < 1e-9);
        assert!((turn_deg(0.0, 90.0) - 90.0).abs() < 1e-9);
        assert!((turn_deg(10.0, -10.0) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_structural_problems() {
        let cases = [
            r#"{"nodes": {}, "edges": []}"#,
            r#"{"nodes": {"a": [0,0,0]}, "edges": [{"from":"a","to":"b","polyline":[[0,0,0],[1,0,0]],"lane_width":3.5,"straight":true}]}"#,
            r#"{"nodes": {"a": [0,0,0], "b": [1,0,0]}, "edges": [{"from":"a","to":"b","polyline":[[0,0,0]],"lane_width":3.5,"straight":true}]}"#,
            r#"{"nodes": {"a": [0,0,0], "b": [1,0,0]}, "edges": [{"from":"a","to":"b","polyline":[[0,0,0],[0,0,0],[1,0,0]],"lane_width":3.5,"straight":true}]}"#,
            r#"{"nodes": {"a": [0,0,0]}, "edges": [], "extra": 1}"#,
        ];
        for c in cases {
            assert!(RoadGraph::from_json(c).is_err(), "{c}");
        }
    }
}
