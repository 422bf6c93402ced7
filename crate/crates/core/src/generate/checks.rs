use super::{example, GenContext, GenerateError, GenerationAttempt};
use crate::config::{PartKind, Requirement, TelemetryCheck};
use crate::dataset::render_requirements;
use crate::llm::{ArtifactKind, Pipeline, Style};

#[derive(Debug, Clone, PartialEq)]
pub struct ChecksOutcome {
    pub checks: Option<Vec<TelemetryCheck>>,
    pub attempt: GenerationAttempt,
}

pub fn generate_postconditions(
    ctx: &GenContext<'_>,
    reqs: &[Requirement],
    style: Style,
    attempt: usize,
) -> Result<ChecksOutcome, GenerateError> {
    if reqs.is_empty() {
        return Err(GenerateError::NoRequirements);
    }
    let v = &ctx.assets.validator;
    let params = |name: &str| -> Option<Result<String, String>> {
        match name {
            "requirements" => Some(Ok(render_requirements(reqs))),
            "schema" => Some(Ok(v.schemas.get(PartKind::Checks).source().to_string())),
            "telemetry_options" => Some(Ok(v.catalogs.signal_listing())),
            "events" => Some(Ok(v.catalogs.event_listing())),
            "example_requirements" => example(ctx, Pipeline::Postcondition, "requirements.txt"),
            "example_config" => example(ctx, Pipeline::Postcondition, "checks.json"),
            "reasoning_examples" => example(ctx, Pipeline::Postcondition, "reasoning.txt"),
            _ => None,
        }
    };
    let mut record = ctx.exchange(Pipeline::Postcondition, style, attempt, ArtifactKind::JsonDocument, &params);
    let checks = record.artifact.as_deref().and_then(|text| match v.parse_checks(text) {
        Ok(c) => Some(c.telemetry),
        Err(e) => {
            record.errors.push(format!("checks: {e}"));
            None
        }
    });
    Ok(ChecksOutcome { checks, attempt: record })
}
