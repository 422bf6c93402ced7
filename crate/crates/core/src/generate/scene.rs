use super::{example, GenContext, GenerateError, GenerationAttempt};
use crate::assets::PLACEMENT_GRAMMAR;
use crate::config::{canonical_json, to_value, PartKind, Requirement, SceneConfig};
use crate::dataset::render_requirements;
use crate::llm::{ArtifactKind, Pipeline, Style};
use crate::placement::{self, PlacementProgram, PlacementResult};
use crate::road::RoadGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneOutcome {
    /// The resolved scene, or the step-1 scene with `resolved: false` when
    /// placement failed, or `None` when step 1 failed.
    pub scene: Option<SceneConfig>,
    pub program: Option<PlacementProgram>,
    pub placement: Option<PlacementResult>,
    /// The step-2 program parsed and ran to a well-formed result.
    pub code_gen_ok: bool,
    /// Step 1, then step 2 when step 1 produced a scene.
    pub attempts: Vec<GenerationAttempt>,
}

/// Two-step pre-condition generation: direct parameters first, then a
/// placement program that fills in spawn points, targets and triggers.
pub fn generate_preconditions(
    ctx: &GenContext<'_>,
    reqs: &[Requirement],
    style: Style,
    graph: &RoadGraph,
    attempt: usize,
) -> Result<SceneOutcome, GenerateError> {
    if reqs.is_empty() {
        return Err(GenerateError::NoRequirements);
    }
    let v = &ctx.assets.validator;
    let requirements = render_requirements(reqs);

    let step1_params = |name: &str| -> Option<Result<String, String>> {
        match name {
            "requirements" => Some(Ok(requirements.clone())),
            "schema" => Some(Ok(v.schemas.get(PartKind::Scene).source().to_string())),
            "weather_types" => Some(Ok(v.catalogs.weather_listing())),
            "blueprints" => Some(Ok(v.catalogs.blueprint_listing())),
            "example_requirements" => example(ctx, Pipeline::PreconditionStep1, "requirements.txt"),
            "example_config" => example(ctx, Pipeline::PreconditionStep1, "scene.json"),
            _ => None,
        }
    };
    let mut step1 = ctx.exchange(Pipeline::PreconditionStep1, style, attempt, ArtifactKind::JsonDocument, &step1_params);
    let scene = step1.artifact.as_deref().and_then(|text| match v.parse_scene(text) {
        Ok(s) if s.resolved => {
            step1.errors.push("scene: step 1 must leave the scene unresolved".into());
            None
        }
        Ok(s) => Some(s),
        Err(e) => {
            step1.errors.push(format!("scene: {e}"));
            None
        }
    });
    let Some(scene) = scene else {
        return Ok(SceneOutcome {
            scene: None,
            program: None,
            placement: None,
            code_gen_ok: false,
            attempts: vec![step1],
        });
    };

    let scene_text = canonical_json(&to_value(&scene));
    let step2_params = |name: &str| -> Option<Result<String, String>> {
        match name {
            "requirements" => Some(Ok(requirements.clone())),
            "scene" => Some(Ok(scene_text.clone())),
            "tools" => Some(Ok(placement::registry_doc())),
            "grammar" => Some(Ok(PLACEMENT_GRAMMAR.to_string())),
            "example_requirements" => example(ctx, Pipeline::PreconditionStep2, "requirements.txt"),
            "example_program" => example(ctx, Pipeline::PreconditionStep2, "program.txt"),
            _ => None,
        }
    };
    let mut step2 = ctx.exchange(Pipeline::PreconditionStep2, style, attempt, ArtifactKind::PlacementProgram, &step2_params);

    let mut program = None;
    let mut placement_result = None;
    let mut resolved = None;
    if let Some(source) = step2.artifact.as_deref() {
        match placement::parse_program(source) {
            Err(e) => step2.errors.push(format!("placement: {e}")),
            Ok(p) => {
                match placement::interpret(&p, graph) {
                    Err(e) => step2.errors.push(format!("placement: {e}")),
                    Ok(r) => {
                        match placement::apply_to_scene(&scene, &r, &p) {
                            Err(e) => step2.errors.push(format!("placement: {e}")),
                            Ok(s) => {
                                let violations = v.check(&to_value(&s), PartKind::Scene);
                                if violations.is_empty() {
                                    resolved = Some(s);
                                } else {
                                    for violation in violations {
                                        step2.errors.push(format!("resolved scene: {violation}"));
                                    }
                                }
                            }
                        }
                        placement_result = Some(r);
                    }
                }
                program = Some(p);
            }
        }
    }
    let code_gen_ok = placement_result.is_some();
    let scene = match resolved {
        Some(s) => s,
        None => {
            let mut unresolved = scene;
            unresolved.placement_program = program.as_ref().map(|p| p.source().to_string());
            unresolved
        }
    };
    Ok(SceneOutcome {
        scene: Some(scene),
        program,
        placement: placement_result,
        code_gen_ok,
        attempts: vec![step1, step2],
    })
}
