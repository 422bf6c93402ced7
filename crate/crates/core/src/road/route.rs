use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::heading_deg;
use super::{RoadError, SPAWN_HEIGHT_OFFSET};
use crate::config::{normalize_angle, Location, Transform};

/// Which way a spawned agent faces relative to the route direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AgentRotation {
    Forward,
    Backward,
}

impl fmt::Display for AgentRotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentRotation::Forward => "FORWARD",
            AgentRotation::Backward => "BACKWARD",
        })
    }
}

/// Polyline route parameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    waypoints: Vec<Location>,
    cumulative_s: Vec<f64>,
    nodes: Vec<String>,
}

impl Route {
    /// Builds a route from at least two points, no two consecutive ones equal.
    pub fn from_points(points: Vec<Location>) -> Result<Self, RoadError> {
        Self::with_nodes(points, Vec::new())
    }

    pub(crate) fn with_nodes(points: Vec<Location>, nodes: Vec<String>) -> Result<Self, RoadError> {
        if points.len() < 2 {
            return Err(RoadError::Invariant("a route needs at least 2 waypoints".into()));
        }
        let mut cumulative_s = Vec::with_capacity(points.len());
        cumulative_s.push(0.0);
        for w in points.windows(2) {
            let d = w[0].distance(&w[1]);
            if !(d > 0.0 && d.is_finite()) {
                return Err(RoadError::Invariant("consecutive route waypoints coincide".into()));
            }
            cumulative_s.push(cumulative_s.last().unwrap() + d);
        }
        Ok(Self {
            waypoints: points,
            cumulative_s,
            nodes,
        })
    }

    pub fn waypoints(&self) -> &[Location] {
        &self.waypoints
    }

    pub fn cumulative_s(&self) -> &[f64] {
        &self.cumulative_s
    }

    /// Graph node ids the route passes through, when built from a graph.
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn length(&self) -> f64 {
        *self.cumulative_s.last().unwrap()
    }

    pub fn first(&self) -> Location {
        self.waypoints[0]
    }

    pub fn last(&self) -> Location {
        *self.waypoints.last().unwrap()
    }

    fn segment_heading(&self, seg: usize) -> f64 {
        heading_deg(self.waypoints[seg].to_array(), self.waypoints[seg + 1].to_array())
    }

    /// Per-segment headings in degrees.
    pub fn headings(&self) -> Vec<f64> {
        (0..self.waypoints.len() - 1).map(|i| self.segment_heading(i)).collect()
    }

    fn check_s(&self, s: f64) -> Result<f64, RoadError> {
        let len = self.length();
        let slack = 1e-9 * len.max(1.0);
        if !s.is_finite() || s < -slack || s > len + slack {
            return Err(RoadError::OutOfRange { s, length: len });
        }
        Ok(s.clamp(0.0, len))
    }

    /// Segment index containing arc position `s` (already range-checked).
    fn segment_at(&self, s: f64) -> usize {
        let last_seg = self.waypoints.len() - 2;
        // first cumulative value strictly greater than s, minus one
        let idx = self.cumulative_s.partition_point(|c| *c <= s);
        idx.saturating_sub(1).min(last_seg)
    }

    /// Location at arc length `s` and the heading of the containing segment.
    pub fn point_at(&self, s: f64) -> Result<(Location, f64), RoadError> {
        let s = self.check_s(s)?;
        let seg = self.segment_at(s);
        let (a, b) = (self.waypoints[seg], self.waypoints[seg + 1]);
        let s0 = self.cumulative_s[seg];
        let t = (s - s0) / (self.cumulative_s[seg + 1] - s0);
        let loc = Location::new(
            a.x + t * (b.x - a.x),
            a.y + t * (b.y - a.y),
            a.z + t * (b.z - a.z),
        );
        Ok((loc, self.segment_heading(seg)))
    }

    /// Point at arc length `s`, shifted `lateral` meters to the right of the
    /// travel direction (negative is left).
    pub fn offset_point(&self, s: f64, lateral: f64) -> Result<(Location, f64), RoadError> {
        let (p, heading) = self.point_at(s)?;
        let h = heading.to_radians();
        let (nx, ny) = (-h.sin(), h.cos());
        Ok((Location::new(p.x + lateral * nx, p.y + lateral * ny, p.z), heading))
    }

    /// Arc position of the closest route point to `p` and the signed lateral
    /// offset of `p` (positive to the right of travel).
    pub fn project(&self, p: Location) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for seg in 0..self.waypoints.len() - 1 {
            let (a, b) = (self.waypoints[seg], self.waypoints[seg + 1]);
            let (dx, dy, dz) = (b.x - a.x, b.y - a.y, b.z - a.z);
            let len2 = dx * dx + dy * dy + dz * dz;
            let t = (((p.x - a.x) * dx + (p.y - a.y) * dy + (p.z - a.z) * dz) / len2).clamp(0.0, 1.0);
            let foot = Location::new(a.x + t * dx, a.y + t * dy, a.z + t * dz);
            let dist = foot.distance(&p);
            if dist < best.0 - 1e-12 {
                let h = self.segment_heading(seg).to_radians();
                let lateral = (p.x - foot.x) * -h.sin() + (p.y - foot.y) * h.cos();
                let s = self.cumulative_s[seg] + t * (self.cumulative_s[seg + 1] - self.cumulative_s[seg]);
                best = (dist, s, lateral);
            }
        }
        (best.1, best.2)
    }

    /// Spawn transform at arc length `s`, lifted above the road surface.
    pub fn create_spawnpoint(&self, s: f64, rotation: AgentRotation) -> Result<Transform, RoadError> {
        let (loc, heading) = self.point_at(s)?;
        let yaw = match rotation {
            AgentRotation::Forward => heading,
            AgentRotation::Backward => heading + 180.0,
        };
        let lifted = Location::new(loc.x, loc.y, loc.z + SPAWN_HEIGHT_OFFSET);
        Ok(Transform::at(lifted, normalize_angle(yaw)))
    }

    pub fn to_points(&self) -> Vec<[f64; 3]> {
        self.waypoints.iter().map(|w| w.to_array()).collect()
    }
}
