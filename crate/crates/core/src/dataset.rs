//! Requirement datasets: one `[id] text` per line, blank lines ignored.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Requirement;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

pub fn parse_requirements(text: &str) -> Result<Vec<Requirement>, DatasetError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| DatasetError::Format {
            line: idx + 1,
            message,
        };
        let rest = line
            .strip_prefix('[')
            .ok_or_else(|| err("expected `[id] text`".into()))?;
        let (id, body) = rest
            .split_once(']')
            .ok_or_else(|| err("missing `]` after requirement id".into()))?;
        let id: u32 = id
            .trim()
            .parse()
            .ok()
            .filter(|id| *id > 0)
            .ok_or_else(|| err(format!("`{id}` is not a positive integer id")))?;
        let body = body.trim();
        if body.is_empty() {
            return Err(err(format!("requirement {id} has no text")));
        }
        if !seen.insert(id) {
            return Err(err(format!("duplicate requirement id {id}")));
        }
        out.push(Requirement::new(id, body));
    }
    Ok(out)
}

pub fn load_requirements(path: &Path) -> Result<Vec<Requirement>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_requirements(&text)
}

/// Renders requirements back into the dataset line format.
pub fn render_requirements(reqs: &[Requirement]) -> String {
    reqs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Uniformly random, seed-determined permutation of the requirements.
pub fn shuffle_requirements(reqs: &[Requirement], seed: u64) -> Vec<Requirement> {
    let mut out = reqs.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.shuffle(&mut rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bracketed_id_lines_and_skips_blanks() {
        let reqs = parse_requirements("[1] First.\n\n[2]   Second one.  \n[8] Gap is fine.\n").unwrap();
        assert_eq!(reqs.len(), 3);
        assert_eq!(reqs[1].text, "Second one.");
        assert_eq!(reqs[2].id, 8);
        assert_eq!(render_requirements(&reqs[..1]), "[1] First.");
    }

    #[test]
    fn rejects_malformed_lines() {
        for bad in ["no brackets", "[x] text", "[0] zero", "[3]", "[1] a\n[1] b"] {
            assert!(parse_requirements(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn shuffle_is_seeded_permutation() {
        let reqs: Vec<_> = (1..=33).map(|i| Requirement::new(i, format!("r{i}"))).collect();
        let a = shuffle_requirements(&reqs, 0);
        assert_eq!(a, shuffle_requirements(&reqs, 0));
        assert_ne!(a, reqs);
        let mut ids: Vec<_> = a.iter().map(|r| r.id).collect();
        ids.sort();
        assert_eq!(ids, (1..=33).collect::<Vec<_>>());
        let one = vec![Requirement::new(1, "x")];
        assert_eq!(shuffle_requirements(&one, 9), one);
    }
}
