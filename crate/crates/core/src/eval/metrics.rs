use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::assertion::{AssertionOutcome, Suite};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("k = {k} must be between 1 and n = {n}")]
    SampleSize { n: usize, k: usize },
    #[error("c = {c} correct attempts exceeds n = {n}")]
    TooManyCorrect { n: usize, c: usize },
    #[error("no grades to average")]
    Empty,
    #[error("attempt {0} carries no code generation flag")]
    MissingCodeGenFlag(usize),
}

/// Result of grading one generated artifact against a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptGrade {
    pub attempt: usize,
    pub passed: usize,
    pub total: usize,
    /// Test passing rate, `passed / total`.
    pub tpr: f64,
    /// All assertions passed.
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_gen_ok: Option<bool>,
    /// Ids of the failed assertions, in suite order.
    pub failed: Vec<String>,
}

impl AttemptGrade {
    fn from_outcomes(attempt: usize, outcomes: &[AssertionOutcome]) -> Self {
        let total = outcomes.len();
        let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.clone()).collect();
        let passed = total - failed.len();
        Self {
            attempt,
            passed,
            total,
            tpr: passed as f64 / total as f64,
            correct: passed == total,
            code_gen_ok: None,
            failed,
        }
    }

    pub fn with_attempt(mut self, attempt: usize) -> Self {
        self.attempt = attempt;
        self
    }

    pub fn with_code_gen(mut self, ok: bool) -> Self {
        self.code_gen_ok = Some(ok);
        self
    }
}

/// Every assertion's outcome. A missing artifact fails all of them.
pub fn grade_detailed(artifact: Option<&Value>, suite: &Suite) -> Vec<AssertionOutcome> {
    suite
        .assertions
        .iter()
        .map(|a| match artifact {
            Some(doc) => a.evaluate(doc),
            None => AssertionOutcome {
                id: a.id.clone(),
                passed: false,
                actual: None,
                message: "no artifact".into(),
            },
        })
        .collect()
}

/// Grades an artifact; an attempt without a parseable artifact grades 0/total.
pub fn grade(artifact: Option<&Value>, suite: &Suite) -> AttemptGrade {
    AttemptGrade::from_outcomes(0, &grade_detailed(artifact, suite))
}

/// Probability that a random size-`k` subset of `n` attempts, `c` of them
/// correct, contains at least one correct attempt:
/// `1 - C(n-c, k) / C(n, k)`, evaluated as a product to stay finite.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64, MetricError> {
    if k == 0 || k > n {
        return Err(MetricError::SampleSize { n, k });
    }
    if c > n {
        return Err(MetricError::TooManyCorrect { n, c });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let miss: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - miss)
}

pub fn avg_tpr(grades: &[AttemptGrade]) -> Result<f64, MetricError> {
    if grades.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(grades.iter().map(|g| g.tpr).sum::<f64>() / grades.len() as f64)
}

/// Fraction of attempts whose placement program parsed and ran.
pub fn code_gen_success_rate(grades: &[AttemptGrade]) -> Result<f64, MetricError> {
    if grades.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut ok = 0usize;
    for g in grades {
        match g.code_gen_ok {
            Some(true) => ok += 1,
            Some(false) => {}
            None => return Err(MetricError::MissingCodeGenFlag(g.attempt)),
        }
    }
    Ok(ok as f64 / grades.len() as f64)
}
