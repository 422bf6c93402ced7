use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::trace::TelemetryTrace;
use crate::config::{CheckValue, TelemetryCheck, Unit};

/// Equality tolerance, in the unit of the check, when the check gives none.
pub const DEFAULT_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckError {
    #[error("event `{0}` does not occur in the trace")]
    MissingEvent(String),
    #[error("window is inverted: `{begin}` at {t_begin} s comes after `{end}` at {t_end} s")]
    InvertedWindow {
        begin: String,
        end: String,
        t_begin: f64,
        t_end: f64,
    },
    #[error("signal `{0}` is not in the trace")]
    MissingSignal(String),
    #[error("signal `{0}` has no unit in the signal catalog")]
    UnknownSignal(String),
    #[error("cannot convert `{signal}` from {from} to {to}")]
    Conversion { signal: String, from: Unit, to: Unit },
    #[error("check compares a {unit} signal against {value}")]
    ValueType { unit: Unit, value: CheckValue },
}

/// Time span a check is evaluated over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    Point { t: f64 },
    Range { t_begin: f64, t_end: f64 },
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Point { t } => write!(f, "at {t:.2} s"),
            Window::Range { t_begin, t_end } => write!(f, "{t_begin:.2}..{t_end:.2} s"),
        }
    }
}

/// Resolves the check's events to times, using the first occurrence of each.
pub fn resolve_window(check: &TelemetryCheck, trace: &TelemetryTrace) -> Result<Window, CheckError> {
    let at = |name: &str| trace.event_time(name).ok_or_else(|| CheckError::MissingEvent(name.to_string()));
    let t_begin = at(&check.begin)?;
    let Some(end) = &check.end else {
        return Ok(Window::Point { t: t_begin });
    };
    let t_end = at(end)?;
    if t_begin > t_end {
        return Err(CheckError::InvertedWindow {
            begin: check.begin.clone(),
            end: end.clone(),
            t_begin,
            t_end,
        });
    }
    Ok(Window::Range { t_begin, t_end })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub value: CheckValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub passed: bool,
    pub window: Option<Window>,
    /// First sample that violates the predicate.
    pub witness: Option<Witness>,
    pub message: String,
}

/// Evaluates one check. Signal values are converted to the unit the signal
/// catalog gives for the check's sensor. A range check must hold at every
/// sample inside the window; a point check uses the sample nearest the
/// event (the earlier one on a tie).
pub fn evaluate_check(
    check: &TelemetryCheck,
    trace: &TelemetryTrace,
    units: &BTreeMap<String, Unit>,
) -> Result<CheckResult, CheckError> {
    let window = resolve_window(check, trace)?;
    let unit = *units
        .get(&check.sensor)
        .ok_or_else(|| CheckError::UnknownSignal(check.sensor.clone()))?;
    let raw = trace
        .signals
        .get(&check.sensor)
        .ok_or_else(|| CheckError::MissingSignal(check.sensor.clone()))?;
    let signal = raw.converted(unit).ok_or_else(|| CheckError::Conversion {
        signal: check.sensor.clone(),
        from: raw.unit,
        to: unit,
    })?;
    match (unit == Unit::Boolean, check.value) {
        (true, CheckValue::Number(_)) | (false, CheckValue::Bool(_)) => {
            return Err(CheckError::ValueType { unit, value: check.value })
        }
        _ => {}
    }
    let tolerance = check.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    let holds = |v: CheckValue| match (v, check.value) {
        (CheckValue::Number(a), CheckValue::Number(e)) => check.operator.compare(a, e, tolerance),
        (CheckValue::Bool(a), CheckValue::Bool(e)) => (a == e) == (check.operator == crate::config::Operator::Eq),
        _ => false,
    };

    let samples = &signal.samples;
    let selected: Vec<(f64, CheckValue)> = match window {
        Window::Point { t } => {
            let i = samples.partition_point(|s| s.0 < t);
            let nearest = match (i.checked_sub(1), samples.get(i)) {
                (Some(j), Some(after)) if t - samples[j].0 <= after.0 - t => samples[j],
                (_, Some(after)) => *after,
                (Some(j), None) => samples[j],
                (None, None) => unreachable!("validated traces have samples"),
            };
            vec![nearest]
        }
        Window::Range { t_begin, t_end } => samples
            .iter()
            .copied()
            .filter(|s| s.0 >= t_begin && s.0 <= t_end)
            .collect(),
    };
    let witness = selected
        .iter()
        .find(|s| !holds(s.1))
        .map(|&(t, value)| Witness { t, value });
    let expectation = format!("{} {} {}", check.sensor, check.operator, check.value);
    let message = match (&witness, window) {
        (Some(w), _) => {
            let unit = if unit == Unit::Boolean { String::new() } else { format!(" {unit}") };
            format!("{expectation} violated: {}{unit} at {:.2} s", w.value, w.t)
        }
        (None, Window::Range { .. }) if selected.is_empty() => format!("{expectation} holds vacuously: no samples {window}"),
        (None, _) => format!("{expectation} holds {window}"),
    };
    Ok(CheckResult {
        id: check.id.clone(),
        passed: witness.is_none(),
        window: Some(window),
        witness,
        message,
    })
}

/// Results in check order plus pass counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub results: Vec<CheckResult>,
    pub passed: usize,
    pub total: usize,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }

    pub fn summary(&self) -> String {
        format!("{}/{} passed", self.passed, self.total)
    }
}

/// Evaluates every check; a check that cannot be evaluated fails with the
/// reason as its message.
pub fn evaluate_all(checks: &[TelemetryCheck], trace: &TelemetryTrace, units: &BTreeMap<String, Unit>) -> CheckReport {
    let results: Vec<CheckResult> = checks
        .iter()
        .map(|c| {
            evaluate_check(c, trace, units).unwrap_or_else(|e| CheckResult {
                id: c.id.clone(),
                passed: false,
                window: None,
                witness: None,
                message: e.to_string(),
            })
        })
        .collect();
    let passed = results.iter().filter(|r| r.passed).count();
    CheckReport {
        total: results.len(),
        passed,
        results,
    }
}
