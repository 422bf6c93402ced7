//! Road network model and the geometry tools used for agent placement.
//!
//! All internal geometry is SI: meters and meters per second. Speeds in
//! km/h only appear in configuration documents and telemetry.

mod graph;
mod route;

use std::collections::BTreeSet;

pub use graph::{Edge, RoadGraph};
pub use route::{AgentRotation, Route};

use graph::turn_deg;

/// Largest heading change in degrees still considered a straight line.
pub const STRAIGHTNESS_TOLERANCE_DEG: f64 = 1.0;

/// Height in meters added to spawn locations so agents do not spawn
/// intersecting the road surface.
pub const SPAWN_HEIGHT_OFFSET: f64 = 0.3;

/// Default lateral start offset of a crossing pedestrian: one lane width.
pub const PEDESTRIAN_LATERAL_OFFSET: f64 = 3.5;

#[derive(Debug, thiserror::Error)]
pub enum RoadError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid graph file: {0}")]
    Format(String),
    #[error("invalid road geometry: {0}")]
    Invariant(String),
    #[error("arc position {s} is outside the route (length {length})")]
    OutOfRange { s: f64, length: f64 },
    #[error("{0}")]
    Domain(String),
}

pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / 3.6
}

pub fn ms_to_kmh(ms: f64) -> f64 {
    ms * 3.6
}

/// Gap in meters that closes in `ttc` seconds at the given speeds (m/s).
pub fn ttc_to_distance(ttc: f64, v_subject: f64, v_lead: f64) -> Result<f64, RoadError> {
    if !(ttc.is_finite() && ttc > 0.0) {
        return Err(RoadError::Domain(format!("time to collision must be positive, got {ttc}")));
    }
    let closing = v_subject - v_lead;
    if !(closing.is_finite() && closing > 0.0) {
        return Err(RoadError::Domain(format!(
            "closing speed must be positive (subject {v_subject} m/s, lead {v_lead} m/s)"
        )));
    }
    Ok(ttc * closing)
}

/// Remaining distance of the subject to the collision point at which a
/// crosser starting `lateral_offset` meters off the path must set off so
/// that both arrive at the same time.
pub fn crossing_trigger_distance(
    v_subject: f64,
    v_crosser: f64,
    lateral_offset: f64,
) -> Result<f64, RoadError> {
    for (name, v) in [
        ("subject speed", v_subject),
        ("crosser speed", v_crosser),
        ("lateral offset", lateral_offset),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(RoadError::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(v_subject * (lateral_offset / v_crosser))
}

fn edge_is_straight(edge: &Edge, tol: f64) -> bool {
    edge.straight
        && edge
            .segment_headings()
            .windows(2)
            .all(|w| turn_deg(w[0], w[1]) <= tol)
}

/// Maximal chains of straight edges whose junctions turn by at most the
/// straightness tolerance, sorted by the node ids they pass through.
pub fn get_routes_straight(graph: &RoadGraph) -> Vec<Route> {
    routes_straight_with_tolerance(graph, STRAIGHTNESS_TOLERANCE_DEG)
}

pub fn routes_straight_with_tolerance(graph: &RoadGraph, tol: f64) -> Vec<Route> {
    let eligible: Vec<usize> = (0..graph.edges.len())
        .filter(|&i| edge_is_straight(&graph.edges[i], tol))
        .collect();
    let successors = |i: usize| -> Vec<usize> {
        let e = &graph.edges[i];
        let out_heading = *e.segment_headings().last().unwrap();
        let mut next: Vec<usize> = eligible
            .iter()
            .copied()
            .filter(|&j| {
                let f = &graph.edges[j];
                j != i && f.from == e.to && turn_deg(out_heading, f.segment_headings()[0]) <= tol
            })
            .collect();
        next.sort_by(|a, b| graph.edges[*a].to.cmp(&graph.edges[*b].to).then(a.cmp(b)));
        next
    };
    let has_pred: BTreeSet<usize> = eligible.iter().flat_map(|&i| successors(i)).collect();

    let mut chains: Vec<Vec<usize>> = Vec::new();
    let mut starts: Vec<usize> = eligible.iter().copied().filter(|i| !has_pred.contains(i)).collect();
    let mut covered = BTreeSet::new();
    loop {
        for &start in &starts {
            extend_chains(vec![start], &successors, &mut chains);
        }
        covered.extend(chains.iter().flatten().copied());
        // Edges only reachable inside a straight cycle have no chain start.
        match eligible.iter().copied().find(|i| !covered.contains(i)) {
            Some(i) => starts = vec![i],
            None => break,
        }
    }

    let mut routes: Vec<Route> = chains
        .into_iter()
        .filter_map(|chain| chain_to_route(graph, &chain))
        .collect();
    routes.sort_by(|a, b| a.nodes().cmp(b.nodes()));
    routes.dedup_by(|a, b| a.nodes() == b.nodes());
    routes
}

fn extend_chains(path: Vec<usize>, successors: &dyn Fn(usize) -> Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let last = *path.last().unwrap();
    let next: Vec<usize> = successors(last).into_iter().filter(|j| !path.contains(j)).collect();
    if next.is_empty() {
        out.push(path);
        return;
    }
    for j in next {
        let mut p = path.clone();
        p.push(j);
        extend_chains(p, successors, out);
    }
}

fn chain_to_route(graph: &RoadGraph, chain: &[usize]) -> Option<Route> {
    let mut points = Vec::new();
    let mut nodes = vec![graph.edges[chain[0]].from.clone()];
    for &i in chain {
        let e = &graph.edges[i];
        for p in e.points() {
            if points.last().is_none_or(|q: &crate::config::Location| q.distance(&p) > 1e-9) {
                points.push(p);
            }
        }
        nodes.push(e.to.clone());
    }
    Route::with_nodes(points, nodes).ok()
}

/// Routes at least `min_length` meters long, in their original order.
pub fn filter_routes_by_length(routes: &[Route], min_length: f64) -> Vec<Route> {
    routes
        .iter()
        .filter(|r| r.length() >= min_length)
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ttc_distance_examples() {
        assert!((ttc_to_distance(4.0, 5.5556, 0.0).unwrap() - 22.222).abs() < 0.001);
        assert_eq!(ttc_to_distance(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(ttc_to_distance(3.0, 7.0, 7.0).is_err());
        assert!(ttc_to_distance(0.0, 7.0, 1.0).is_err());
    }

    #[test]
    fn crossing_trigger_examples() {
        assert!((crossing_trigger_distance(5.5556, 1.3889, 3.5).unwrap() - 14.0).abs() < 0.01);
        assert!((crossing_trigger_distance(2.5, 2.5, 6.0).unwrap() - 6.0).abs() < 1e-12);
        assert!(crossing_trigger_distance(2.5, 1.0, 0.0).is_err());
        assert!(crossing_trigger_distance(2.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn filter_keeps_order_and_identity_at_zero() {
        let mk = |len: f64| {
            Route::from_points(vec![
                crate::config::Location::new(0.0, 0.0, 0.0),
                crate::config::Location::new(len, 0.0, 0.0),
            ])
            .unwrap()
        };
        let routes = vec![mk(200.0), mk(10.0), mk(50.0)];
        assert_eq!(filter_routes_by_length(&routes, 0.0), routes);
        let kept = filter_routes_by_length(&routes, 33.33);
        assert_eq!(kept.iter().map(Route::length).collect::<Vec<_>>(), vec![200.0, 50.0]);
        assert!(filter_routes_by_length(&routes[..1], 500.0).is_empty());
    }

    #[test]
    fn straight_chain_spans_collinear_edges_but_not_corners() {
        let g = RoadGraph::from_json(
            r#"{"nodes": {"a": [0,0,0], "b": [50,0,0], "c": [120,0,0], "d": [120,80,0]},
                "edges": [
                  {"from":"a","to":"b","polyline":[[0,0,0],[50,0,0]],"lane_width":3.5,"straight":true},
                  {"from":"b","to":"c","polyline":[[50,0,0],[120,0,0]],"lane_width":3.5,"straight":true},
                  {"from":"c","to":"d","polyline":[[120,0,0],[120,80,0]],"lane_width":3.5,"straight":true}
                ]}"#,
        )
        .unwrap();
        let routes = get_routes_straight(&g);
        assert_eq!(routes.len(), 2);
        assert_eq!(routes[0].nodes(), ["a", "b", "c"]);
        assert!((routes[0].length() - 120.0).abs() < 1e-9);
        assert_eq!(routes[1].nodes(), ["c", "d"]);
    }

    #[test]
    fn curved_or_flagged_edges_are_not_straight() {
        let g = RoadGraph::from_json(
            r#"{"nodes": {"a": [0,0,0], "b": [20,5,0], "c": [0,50,0], "d": [0,90,0]},
                "edges": [
                  {"from":"a","to":"b","polyline":[[0,0,0],[10,0,0],[20,5,0]],"lane_width":3.5,"straight":true},
                  {"from":"c","to":"d","polyline":[[0,50,0],[0,90,0]],"lane_width":3.5,"straight":false}
                ]}"#,
        )
        .unwrap();
        assert!(get_routes_straight(&g).is_empty());
    }

    #[test]
    fn empty_edge_set_yields_no_routes() {
        let g = RoadGraph::from_json(r#"{"nodes": {"a": [0,0,0]}, "edges": []}"#).unwrap();
        assert!(get_routes_straight(&g).is_empty());
    }
}
