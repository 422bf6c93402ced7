//! Merging the three generated parts into one scenario document.
//!
//! The vehicle part is the identity authority: the scene's subject agent is
//! renamed to the vehicle id, and any extra aliases are rewritten the same
//! way. A collision sensor is injected so that every merged scenario can
//! report collisions, even though requirements rarely ask for one.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::{
    AgentRole, SceneConfig, ScenarioDocument, SensorSpec, TelemetryCheck, Transform, Validator, VehicleConfig,
    Violation,
};

pub const COLLISION_BLUEPRINT: &str = "sensor.other.collision";
pub const COLLISION_SENSOR_ID: &str = "collision_injected";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MergeError {
    #[error("the scene is not resolved; run placement before merging")]
    Unresolved,
    #[error("alias `{0}` is part of a cycle")]
    AliasCycle(String),
    #[error("{location} refers to agent `{agent}`, which is not in the scene")]
    DanglingReference { location: String, agent: String },
    #[error("agent id `{0}` occurs more than once after aliasing")]
    DuplicateAgent(String),
    #[error("the vehicle has {0} collision sensors; at most one is allowed")]
    MultipleCollisionSensors(usize),
}

/// Identifier unification and collision-sensor injection settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergePolicy {
    /// Extra renames applied to agent ids, e.g. `"subject" -> "ego"`. The
    /// scene's subject agent is always renamed to the vehicle id.
    pub aliases: BTreeMap<String, String>,
    pub collision_blueprint: String,
    pub collision_sensor_id: String,
}

impl Default for MergePolicy {
    fn default() -> Self {
        Self {
            aliases: BTreeMap::new(),
            collision_blueprint: COLLISION_BLUEPRINT.into(),
            collision_sensor_id: COLLISION_SENSOR_ID.into(),
        }
    }
}

impl MergePolicy {
    /// Follows alias chains to their end; fails on cycles.
    pub fn resolve<'a>(&'a self, id: &'a str) -> Result<&'a str, MergeError> {
        let mut current = id;
        let mut seen = BTreeSet::new();
        while let Some(next) = self.aliases.get(current) {
            if !seen.insert(current) {
                return Err(MergeError::AliasCycle(id.to_string()));
            }
            if next == current {
                break;
            }
            current = next;
        }
        Ok(current)
    }

    fn check_acyclic(&self) -> Result<(), MergeError> {
        self.aliases.keys().try_for_each(|k| self.resolve(k).map(drop))
    }
}

/// Merges the parts. Applying it again to the parts of its own output
/// returns the same document.
pub fn merge(
    vehicle: &VehicleConfig,
    scene: &SceneConfig,
    checks: &[TelemetryCheck],
    policy: &MergePolicy,
) -> Result<ScenarioDocument, MergeError> {
    if !scene.resolved {
        return Err(MergeError::Unresolved);
    }
    policy.check_acyclic()?;

    let subject_ids: BTreeSet<&str> = scene.subjects().map(|a| a.id.as_str()).collect();
    let rename = |id: &str| -> Result<String, MergeError> {
        if subject_ids.contains(id) {
            return Ok(vehicle.id.clone());
        }
        policy.resolve(id).map(|r| if subject_ids.contains(r) { vehicle.id.clone() } else { r.to_string() })
    };

    let mut merged_scene = scene.clone();
    let mut seen = BTreeSet::new();
    for agent in &mut merged_scene.agents {
        agent.id = rename(&agent.id)?;
        if !seen.insert(agent.id.clone()) {
            return Err(MergeError::DuplicateAgent(agent.id.clone()));
        }
    }
    for agent in &mut merged_scene.agents {
        let Some(trigger) = agent.trigger.as_mut() else {
            continue;
        };
        trigger.watched_agent = rename(&trigger.watched_agent)?;
        if !seen.contains(&trigger.watched_agent) {
            return Err(MergeError::DanglingReference {
                location: format!("trigger of agent `{}`", agent.id),
                agent: trigger.watched_agent.clone(),
            });
        }
    }

    let mut merged_vehicle = vehicle.clone();
    let collision = merged_vehicle
        .sensors
        .iter()
        .filter(|s| s.blueprint == policy.collision_blueprint)
        .count();
    match collision {
        0 => merged_vehicle.sensors.push(SensorSpec {
            id: policy.collision_sensor_id.clone(),
            blueprint: policy.collision_blueprint.clone(),
            transform: Transform::default(),
            attributes: BTreeMap::new(),
        }),
        1 => {}
        n => return Err(MergeError::MultipleCollisionSensors(n)),
    }

    Ok(ScenarioDocument {
        vehicle: merged_vehicle,
        scene: merged_scene,
        // telemetry checks name signals and events, never agents
        checks: checks.to_vec(),
        provenance: BTreeMap::new(),
    })
}

/// Part-wise schema and catalog validation plus the references that cross
/// parts. An empty result means the document is ready for simulation.
pub fn verify_document(doc: &ScenarioDocument, validator: &Validator) -> Vec<Violation> {
    let mut out = validator.check_document(doc);
    let subjects: Vec<(usize, &str)> = doc
        .scene
        .agents
        .iter()
        .enumerate()
        .filter(|(_, a)| a.role == AgentRole::Subject)
        .map(|(i, a)| (i, a.id.as_str()))
        .collect();
    // the scene schema already reports a wrong subject count
    if let [(i, id)] = subjects[..] {
        if id != doc.vehicle.id {
            out.push(Violation::new(
                format!("/scene/agents/{i}/id"),
                format!("subject agent `{id}` does not match vehicle id `{}`", doc.vehicle.id),
            ));
        }
    }
    let collision = doc
        .vehicle
        .sensors
        .iter()
        .filter(|s| s.blueprint == COLLISION_BLUEPRINT)
        .count();
    if collision != 1 {
        out.push(Violation::new(
            "/vehicle/sensors",
            format!("expected exactly one collision sensor, found {collision}"),
        ));
    }
    if !doc.scene.resolved {
        out.push(Violation::new("/scene/resolved", "the scene is not resolved"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::Assets;
    use crate::config::{AgentSpec, CheckValue, Location, Operator, TriggerSpec};
    use proptest::prelude::*;

    fn vehicle(sensors: &[(&str, &str)]) -> VehicleConfig {
        VehicleConfig {
            id: "ego".into(),
            blueprint: "vehicle.tesla.model3".into(),
            sensors: sensors
                .iter()
                .map(|(id, bp)| SensorSpec {
                    id: id.to_string(),
                    blueprint: bp.to_string(),
                    transform: Transform::default(),
                    attributes: BTreeMap::new(),
                })
                .collect(),
        }
    }

    fn agent(id: &str, role: AgentRole) -> AgentSpec {
        let blueprint = if role == AgentRole::Pedestrian { "walker.pedestrian.0001" } else { "vehicle.audi.tt" };
        AgentSpec {
            id: id.into(),
            role,
            blueprint: blueprint.into(),
            target_speed: 20.0,
            spawn: Some(Transform::default()),
            target: Some(Location::new(50.0, 0.0, 0.0)),
            trigger: None,
        }
    }

    fn scene(agents: Vec<AgentSpec>) -> SceneConfig {
        SceneConfig {
            agents,
            weather: "ClearNoon".into(),
            route_min_length: Some(50.0),
            route: Some(vec![[0.0, 0.0, 0.0], [100.0, 0.0, 0.0]]),
            placement_program: None,
            resolved: true,
        }
    }

    fn check(id: &str, begin: &str) -> TelemetryCheck {
        TelemetryCheck {
            id: id.into(),
            sensor: "speed".into(),
            begin: begin.into(),
            end: None,
            operator: Operator::Eq,
            value: CheckValue::Number(0.0),
            tolerance: None,
        }
    }

    fn car_to_car() -> (VehicleConfig, SceneConfig, Vec<TelemetryCheck>) {
        (
            vehicle(&[("front", "sensor.camera.rgb")]),
            scene(vec![agent("subject", AgentRole::Subject), agent("lead", AgentRole::Lead)]),
            vec![check("ID_END_SPEED", "braking_end_aeb")],
        )
    }

    #[test]
    fn subject_takes_the_vehicle_id_and_collision_is_injected() {
        let (v, s, c) = car_to_car();
        let doc = merge(&v, &s, &c, &MergePolicy::default()).unwrap();
        let ids: Vec<_> = doc.scene.agents.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["ego", "lead"]);
        let last = doc.vehicle.sensors.last().unwrap();
        assert_eq!((last.id.as_str(), last.blueprint.as_str()), (COLLISION_SENSOR_ID, COLLISION_BLUEPRINT));
        assert_eq!(last.transform, Transform::default());
        assert!(verify_document(&doc, &Assets::shipped().validator).is_empty());
    }

    #[test]
    fn existing_collision_sensor_is_kept() {
        let (_, s, c) = car_to_car();
        let v = vehicle(&[("crash", COLLISION_BLUEPRINT)]);
        let doc = merge(&v, &s, &c, &MergePolicy::default()).unwrap();
        assert_eq!(doc.vehicle.sensors, v.sensors);
        let two = vehicle(&[("a", COLLISION_BLUEPRINT), ("b", COLLISION_BLUEPRINT)]);
        assert_eq!(merge(&two, &s, &c, &MergePolicy::default()), Err(MergeError::MultipleCollisionSensors(2)));
    }

    #[test]
    fn triggers_follow_the_rename() {
        let (v, _, c) = car_to_car();
        let mut ped = agent("ped", AgentRole::Pedestrian);
        ped.trigger = Some(TriggerSpec {
            watched_agent: "subject".into(),
            distance_threshold: 14.0,
        });
        let doc = merge(&v, &scene(vec![agent("subject", AgentRole::Subject), ped]), &c, &MergePolicy::default()).unwrap();
        assert_eq!(doc.scene.agents[1].trigger.as_ref().unwrap().watched_agent, "ego");
    }

    #[test]
    fn dangling_trigger_is_an_error() {
        let (v, _, c) = car_to_car();
        let mut ped = agent("ped", AgentRole::Pedestrian);
        ped.trigger = Some(TriggerSpec {
            watched_agent: "lead2".into(),
            distance_threshold: 5.0,
        });
        let err = merge(&v, &scene(vec![agent("subject", AgentRole::Subject), ped]), &c, &MergePolicy::default()).unwrap_err();
        assert!(matches!(&err, MergeError::DanglingReference { agent, .. } if agent == "lead2"), "{err}");
    }

    #[test]
    fn merge_rejects_bad_inputs() {
        let (v, mut s, c) = car_to_car();
        s.agents.push(agent("ego", AgentRole::Lead));
        assert_eq!(merge(&v, &s, &c, &MergePolicy::default()), Err(MergeError::DuplicateAgent("ego".into())));
        let (v, mut s, c) = car_to_car();
        s.resolved = false;
        assert_eq!(merge(&v, &s, &c, &MergePolicy::default()), Err(MergeError::Unresolved));
        let mut policy = MergePolicy::default();
        policy.aliases.insert("a".into(), "b".into());
        policy.aliases.insert("b".into(), "a".into());
        let (v, s, c) = car_to_car();
        assert!(matches!(merge(&v, &s, &c, &policy), Err(MergeError::AliasCycle(_))));
    }

    #[test]
    fn explicit_aliases_chain() {
        let mut policy = MergePolicy::default();
        policy.aliases.insert("lead".into(), "target".into());
        policy.aliases.insert("target".into(), "lead_vehicle".into());
        let (v, s, c) = car_to_car();
        let doc = merge(&v, &s, &c, &policy).unwrap();
        assert_eq!(doc.scene.agents[1].id, "lead_vehicle");
    }

    #[test]
    fn verify_reports_cross_part_problems() {
        let validator = Assets::shipped().validator;
        let (v, s, c) = car_to_car();
        let mut doc = merge(&v, &s, &c, &MergePolicy::default()).unwrap();
        doc.checks.push(check("BAD", "no_such_event"));
        assert_eq!(verify_document(&doc, &validator).len(), 1);
        doc.checks.pop();
        doc.scene.agents[1].role = AgentRole::Subject;
        let v = verify_document(&doc, &validator);
        assert_eq!(v.len(), 1, "{v:?}");
    }

    proptest! {
        #[test]
        fn merge_is_idempotent_and_injects_once(
            n_cameras in 0usize..4,
            has_collision in any::<bool>(),
            n_checks in 0usize..4,
        ) {
            let mut sensors: Vec<(String, String)> =
                (0..n_cameras).map(|i| (format!("cam{i}"), "sensor.camera.rgb".to_string())).collect();
            if has_collision {
                sensors.push(("crash".into(), COLLISION_BLUEPRINT.into()));
            }
            let refs: Vec<(&str, &str)> = sensors.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            let v = vehicle(&refs);
            let s = scene(vec![agent("subject", AgentRole::Subject), agent("lead", AgentRole::Lead)]);
            let c: Vec<_> = (0..n_checks).map(|i| check(&format!("c{i}"), "simulation_end")).collect();
            let policy = MergePolicy::default();
            let once = merge(&v, &s, &c, &policy).unwrap();
            let twice = merge(&once.vehicle, &once.scene, &once.checks, &policy).unwrap();
            prop_assert_eq!(&once, &twice);
            let collisions = once.vehicle.sensors.iter().filter(|s| s.blueprint == COLLISION_BLUEPRINT).count();
            prop_assert_eq!(collisions, 1);
            prop_assert_eq!(once.scene.agents.len(), s.agents.len());
            prop_assert_eq!(once.checks.len(), c.len());
        }
    }
}
