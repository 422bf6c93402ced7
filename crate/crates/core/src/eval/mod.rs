//! Grading generated artifacts against assertion suites and summarizing
//! repeated attempts as average test passing rate and pass@k.

mod assertion;
mod metrics;
mod report;
mod runner;
mod selector;

pub use assertion::{Assertion, AssertionOutcome, PredicateOp, Quantity, Suite, SuiteError, Target, DEFAULT_TOLERANCE, GEOMETRY_TOLERANCE};
pub use metrics::{avg_tpr, code_gen_success_rate, grade, grade_detailed, pass_at_k, AttemptGrade, MetricError};
pub use report::{format_metric, render_report, ExperimentReport, ReportFormat};
pub use selector::{Selector, SelectorError};
pub use runner::{
    manifest, run_experiment, sha256_file, write_run, AttemptRecord, BackendSpec, Condition, ConditionRun,
    ExperimentPipeline, ExperimentRun, ExperimentSpec, RequirementOrder, RunError, DEFAULT_KS,
};
