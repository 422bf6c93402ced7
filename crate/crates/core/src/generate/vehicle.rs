use std::collections::BTreeSet;

use serde_json::Value;

use super::{example, GenContext, GenerateError, GenerationAttempt};
use crate::config::{to_value, PartKind, Requirement, VehicleConfig};
use crate::dataset::render_requirements;
use crate::llm::{ArtifactKind, Pipeline, Style};

/// Split group holding vehicle-level requirements (identity, dimensions).
/// It is not generated on its own; its requirements are given to every
/// other group as context.
pub const VEHICLE_GROUP: &str = "vehicle";

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleOutcome {
    pub config: Option<VehicleConfig>,
    pub attempt: GenerationAttempt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedOutcome {
    pub config: Option<VehicleConfig>,
    /// The split call first, then one per generated group.
    pub attempts: Vec<GenerationAttempt>,
    /// Group name and requirement ids, in generation order.
    pub groups: Vec<(String, Vec<u32>)>,
    pub errors: Vec<String>,
}

fn vehicle_attempt(
    ctx: &GenContext<'_>,
    reqs: &[Requirement],
    style: Style,
    attempt: usize,
) -> (Option<VehicleConfig>, GenerationAttempt) {
    let v = &ctx.assets.validator;
    let params = |name: &str| -> Option<Result<String, String>> {
        match name {
            "vehicle_definition" => Some(Ok(render_requirements(reqs))),
            "schema" => Some(Ok(v.schemas.get(PartKind::Vehicle).source().to_string())),
            "blueprints" => Some(Ok(v.catalogs.blueprint_listing())),
            "example_requirements" => example(ctx, Pipeline::Vehicle, "requirements.txt"),
            "example_config" => example(ctx, Pipeline::Vehicle, "config.json"),
            "reasoning_examples" => example(ctx, Pipeline::Vehicle, "reasoning.txt"),
            _ => None,
        }
    };
    let mut record = ctx.exchange(Pipeline::Vehicle, style, attempt, ArtifactKind::JsonDocument, &params);
    let config = record.artifact.as_deref().and_then(|text| match v.parse_vehicle(text) {
        Ok(c) => Some(c),
        Err(e) => {
            record.errors.push(format!("vehicle: {e}"));
            None
        }
    });
    (config, record)
}

/// Single-prompt vehicle generation.
pub fn generate_vehicle(
    ctx: &GenContext<'_>,
    reqs: &[Requirement],
    style: Style,
    attempt: usize,
) -> Result<VehicleOutcome, GenerateError> {
    if reqs.is_empty() {
        return Err(GenerateError::NoRequirements);
    }
    let (config, attempt) = vehicle_attempt(ctx, reqs, style, attempt);
    Ok(VehicleOutcome { config, attempt })
}

/// Checks a split response (`{"group": [ids...]}`) against the requirement
/// ids. Groups come back ordered by their smallest id.
pub fn parse_split(text: &str, reqs: &[Requirement]) -> Result<Vec<(String, Vec<u32>)>, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("split is not JSON: {e}"))?;
    let Value::Object(map) = value else {
        return Err("split must be a JSON object of group name to requirement ids".into());
    };
    let known: BTreeSet<u32> = reqs.iter().map(|r| r.id).collect();
    let mut seen = BTreeSet::new();
    let mut groups = Vec::new();
    for (name, ids) in map {
        let ids: Vec<u32> = serde_json::from_value(ids)
            .map_err(|_| format!("group `{name}` must be a list of requirement ids"))?;
        if ids.is_empty() {
            return Err(format!("group `{name}` is empty"));
        }
        for id in &ids {
            if !known.contains(id) {
                return Err(format!("group `{name}` names unknown requirement {id}"));
            }
            if !seen.insert(*id) {
                return Err(format!("requirement {id} is assigned to more than one group"));
            }
        }
        groups.push((name, ids));
    }
    let missing: Vec<String> = known.difference(&seen).map(ToString::to_string).collect();
    if !missing.is_empty() {
        return Err(format!("split does not assign requirement(s) {}", missing.join(", ")));
    }
    groups.sort_by_key(|(_, ids)| ids.iter().copied().min());
    Ok(groups)
}

/// Grouped vehicle generation: one split call, then one call per group.
pub fn generate_vehicle_grouped(
    ctx: &GenContext<'_>,
    reqs: &[Requirement],
    style: Style,
    attempt: usize,
) -> Result<GroupedOutcome, GenerateError> {
    if reqs.is_empty() {
        return Err(GenerateError::NoRequirements);
    }
    let requirements = render_requirements(reqs);
    let params = |name: &str| (name == "requirements").then(|| Ok(requirements.clone()));
    let mut split = ctx.exchange(Pipeline::RequirementSplit, Style::Simple, attempt, ArtifactKind::JsonDocument, &params);
    let groups = match split.artifact.as_deref().map(|t| parse_split(t, reqs)) {
        Some(Ok(g)) => g,
        Some(Err(e)) => {
            split.errors.push(format!("split: {e}"));
            return Ok(GroupedOutcome {
                config: None,
                errors: vec![e],
                attempts: vec![split],
                groups: vec![],
            });
        }
        None => {
            return Ok(GroupedOutcome {
                config: None,
                errors: split.errors.clone(),
                attempts: vec![split],
                groups: vec![],
            })
        }
    };

    let context_ids: BTreeSet<u32> = groups
        .iter()
        .filter(|(name, _)| name == VEHICLE_GROUP)
        .flat_map(|(_, ids)| ids.iter().copied())
        .collect();
    let mut to_generate: Vec<(String, Vec<u32>)> =
        groups.iter().filter(|(name, _)| name != VEHICLE_GROUP).cloned().collect();
    if to_generate.is_empty() {
        to_generate = groups.clone();
    }

    let mut attempts = vec![split];
    let mut errors = Vec::new();
    let mut parts = Vec::new();
    for (name, ids) in &to_generate {
        // keep dataset order so a single group reproduces the ungrouped prompt
        let subset: Vec<Requirement> = reqs
            .iter()
            .filter(|r| ids.contains(&r.id) || context_ids.contains(&r.id))
            .cloned()
            .collect();
        let (config, record) = vehicle_attempt(ctx, &subset, style, attempt);
        match config {
            Some(c) => parts.push(c),
            None => errors.push(format!("group `{name}` produced no configuration")),
        }
        attempts.push(record);
    }

    let config = if errors.is_empty() {
        combine(ctx, parts).map_err(|e| errors.push(e)).ok()
    } else {
        None
    };
    Ok(GroupedOutcome {
        config,
        attempts,
        groups: to_generate,
        errors,
    })
}

/// Concatenates group configs; identity comes from the first.
fn combine(ctx: &GenContext<'_>, parts: Vec<VehicleConfig>) -> Result<VehicleConfig, String> {
    let mut iter = parts.into_iter();
    let mut out = iter.next().ok_or("no group produced a configuration")?;
    for part in iter {
        out.sensors.extend(part.sensors);
    }
    let violations = ctx.assets.validator.check(&to_value(&out), PartKind::Vehicle);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(format!("combined configuration is invalid: {}", list.join("; ")));
    }
    Ok(out)
}
