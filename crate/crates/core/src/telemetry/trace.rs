use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{CheckValue, Unit};

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trace: {0}")]
    Format(String),
    #[error("invalid trace: {0}")]
    Invalid(String),
}

/// One recorded signal: `(t, value)` pairs with strictly increasing `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Signal {
    pub unit: Unit,
    pub samples: Vec<(f64, CheckValue)>,
}

impl Signal {
    pub fn first_time(&self) -> Option<f64> {
        self.samples.first().map(|s| s.0)
    }

    pub fn last_time(&self) -> Option<f64> {
        self.samples.last().map(|s| s.0)
    }

    /// The same signal expressed in `unit`, or `None` when no conversion exists.
    pub fn converted(&self, unit: Unit) -> Option<Signal> {
        let factor = self.unit.conversion_factor(unit)?;
        let samples = self
            .samples
            .iter()
            .map(|&(t, v)| match v {
                CheckValue::Number(n) => (t, CheckValue::Number(n * factor)),
                b => (t, b),
            })
            .collect();
        Some(Signal { unit, samples })
    }
}

/// Recorded telemetry of one simulation run, as written by the simulator
/// bridge: `{"dt", "signals": {name: {unit, samples}}, "events": {name: [t...]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryTrace {
    /// Sampling step in seconds.
    pub dt: f64,
    pub signals: BTreeMap<String, Signal>,
    pub events: BTreeMap<String, Vec<f64>>,
    /// Free-form notes from the recorder, e.g. the tolerance used for
    /// `reached_target_speed`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl TelemetryTrace {
    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        let trace: Self = serde_json::from_str(text).map_err(|e| TraceError::Format(e.to_string()))?;
        trace.validate()?;
        Ok(trace)
    }

    pub fn to_json(&self) -> String {
        crate::config::canonical_json(&crate::config::to_value(self))
    }

    /// Checks sampling, unit and event invariants.
    pub fn validate(&self) -> Result<(), TraceError> {
        let invalid = |m: String| Err(TraceError::Invalid(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if self.signals.is_empty() {
            return invalid("no signals recorded".into());
        }
        let mut span = (f64::INFINITY, f64::NEG_INFINITY);
        for (name, signal) in &self.signals {
            if signal.samples.is_empty() {
                return invalid(format!("signal `{name}` has no samples"));
            }
            let boolean = signal.unit == Unit::Boolean;
            let mut prev = f64::NEG_INFINITY;
            for (i, &(t, v)) in signal.samples.iter().enumerate() {
                if !t.is_finite() {
                    return invalid(format!("signal `{name}` sample {i}: time is not finite"));
                }
                if t <= prev {
                    return invalid(format!(
                        "signal `{name}` sample {i}: time {t} does not increase (previous {prev})"
                    ));
                }
                prev = t;
                match v {
                    CheckValue::Bool(_) if !boolean => {
                        return invalid(format!("signal `{name}` sample {i}: boolean value in a {} signal", signal.unit))
                    }
                    CheckValue::Number(_) if boolean => {
                        return invalid(format!("signal `{name}` sample {i}: number in a boolean signal"))
                    }
                    CheckValue::Number(n) if !n.is_finite() => {
                        return invalid(format!("signal `{name}` sample {i}: value is not finite"))
                    }
                    _ => {}
                }
            }
            span.0 = span.0.min(signal.samples[0].0);
            span.1 = span.1.max(prev);
        }
        for (name, times) in &self.events {
            let mut prev = f64::NEG_INFINITY;
            for &t in times {
                if !t.is_finite() || t < prev {
                    return invalid(format!("event `{name}`: times must be finite and ascending"));
                }
                if t < span.0 || t > span.1 {
                    return invalid(format!(
                        "event `{name}` at {t} s lies outside the recorded span [{}, {}]",
                        span.0, span.1
                    ));
                }
                prev = t;
            }
        }
        Ok(())
    }

    /// First occurrence of an event.
    pub fn event_time(&self, name: &str) -> Option<f64> {
        self.events.get(name).and_then(|t| t.first().copied())
    }
}

pub fn load_trace(path: &Path) -> Result<TelemetryTrace, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    TelemetryTrace::from_json(&text)
}
