use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    JsonDocument,
    PlacementProgram,
}

const FENCE: &str = "```";

/// Pulls the artifact out of a raw completion: the body of the first
/// triple-backtick fence if there is one, otherwise the trimmed text.
pub fn extract_artifact(raw: &str, _kind: ArtifactKind) -> Result<String, LlmError> {
    let body = match raw.find(FENCE) {
        None => raw,
        Some(open) => {
            let mut rest = &raw[open + FENCE.len()..];
            // an info string is a single word ending the fence line
            if let Some(nl) = rest.find('\n') {
                let info = &rest[..nl];
                if info.trim().chars().all(|c| c.is_ascii_alphanumeric() || "_+-.".contains(c)) {
                    rest = &rest[nl + 1..];
                }
            }
            match rest.find(FENCE) {
                Some(close) => &rest[..close],
                None => rest,
            }
        }
    };
    let body = body.trim();
    if body.is_empty() {
        return Err(LlmError::EmptyArtifact);
    }
    Ok(body.to_string())
}
