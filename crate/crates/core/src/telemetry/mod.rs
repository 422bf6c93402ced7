//! Post-condition checks evaluated against recorded telemetry.
//!
//! Checks are delimited by named events rather than absolute times. A check
//! with a null end is a point check at its begin event; otherwise the
//! predicate must hold for every sample in the window.

mod check;
mod trace;

pub use check::{
    evaluate_all, evaluate_check, resolve_window, CheckError, CheckReport, CheckResult, Window, Witness,
    DEFAULT_TOLERANCE,
};
pub use trace::{load_trace, Signal, TelemetryTrace, TraceError};

#[cfg(test)]
mod tests;
