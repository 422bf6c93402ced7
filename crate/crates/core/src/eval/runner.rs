use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::assertion::{Suite, SuiteError};
use super::metrics::{grade, AttemptGrade, MetricError};
use super::report::{render_report, ExperimentReport, ReportFormat};
use crate::assets::Assets;
use crate::config::{canonical_json, to_value, Requirement};
use crate::dataset::{load_requirements, shuffle_requirements, DatasetError};
use crate::generate::{
    generate_postconditions, generate_preconditions, generate_vehicle, generate_vehicle_grouped, GenContext,
    GenerateError, GenerationAttempt,
};
use crate::llm::{
    CompletionBackend, CompletionRequest, LiveBackend, LiveConfig, LlmError, RecordingBackend, ReplayBackend, Style,
};
use crate::road::{RoadError, RoadGraph};

pub const DEFAULT_KS: [usize; 4] = [1, 5, 10, 20];

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Road(#[from] RoadError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
}

impl RunError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Which part an experiment generates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentPipeline {
    Vehicle,
    VehicleGrouped,
    Preconditions,
    Postconditions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementOrder {
    Ordered,
    Shuffled,
}

impl fmt::Display for RequirementOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RequirementOrder::Ordered => "ordered",
            RequirementOrder::Shuffled => "shuffled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    Replay {
        dir: PathBuf,
    },
    Live {
        model: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<f64>,
    },
    /// Live calls, each response also written to `dir` as a replay fixture.
    Record {
        model: String,
        dir: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<f64>,
    },
}

impl BackendSpec {
    /// Builds the backend. Live variants read the endpoint from the
    /// environment.
    pub fn build(&self) -> Result<Box<dyn CompletionBackend>, RunError> {
        let live = |model: &str, temperature: Option<f64>| -> Result<LiveBackend, RunError> {
            let mut config = LiveConfig::from_env(model)?;
            if let Some(t) = temperature {
                config.temperature = t;
            }
            Ok(LiveBackend::new(config)?)
        };
        Ok(match self {
            BackendSpec::Replay { dir } => Box::new(ReplayBackend::new(dir)),
            BackendSpec::Live { model, temperature } => Box::new(live(model, *temperature)?),
            BackendSpec::Record { model, dir, temperature } => {
                Box::new(RecordingBackend::new(live(model, *temperature)?, dir)?)
            }
        })
    }

    fn resolve(&mut self, base: &Path) {
        match self {
            BackendSpec::Replay { dir } | BackendSpec::Record { dir, .. } => *dir = base.join(&*dir),
            BackendSpec::Live { .. } => {}
        }
    }
}

fn default_orders() -> Vec<RequirementOrder> {
    vec![RequirementOrder::Ordered]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_ks() -> Vec<usize> {
    DEFAULT_KS.to_vec()
}

/// A condition matrix: every style crossed with every order, and shuffled
/// orders crossed with every seed. Paths are relative to the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub pipeline: ExperimentPipeline,
    pub dataset: PathBuf,
    pub suite: PathBuf,
    /// Road graph for pre-condition placement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    pub styles: Vec<Style>,
    #[serde(default = "default_orders")]
    pub orders: Vec<RequirementOrder>,
    /// Attempts per condition.
    pub n: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_ks")]
    pub k: Vec<usize>,
    pub backend: BackendSpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, RunError> {
        let mut spec: Self = serde_json::from_str(text).map_err(|e| RunError::Spec(e.to_string()))?;
        spec.base_dir = base_dir.to_path_buf();
        spec.backend.resolve(base_dir);
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<(), RunError> {
        let fail = |m: &str| Err(RunError::Spec(m.to_string()));
        if self.n == 0 {
            return fail("n must be at least 1");
        }
        if self.styles.is_empty() || self.orders.is_empty() || self.seeds.is_empty() {
            return fail("styles, orders and seeds must not be empty");
        }
        if self.k.contains(&0) {
            return fail("k values must be at least 1");
        }
        if self.pipeline == ExperimentPipeline::Preconditions && self.graph.is_none() {
            return fail("the preconditions pipeline needs a graph");
        }
        Ok(())
    }

    /// Replaces the seed list, as `--seed` does.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = vec![seed];
        self
    }

    pub fn path(&self, relative: &Path) -> PathBuf {
        self.base_dir.join(relative)
    }

    pub fn conditions(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        for &style in &self.styles {
            for &order in &self.orders {
                let seeds: Vec<Option<u64>> = match order {
                    RequirementOrder::Ordered => vec![None],
                    RequirementOrder::Shuffled => self.seeds.iter().copied().map(Some).collect(),
                };
                for seed in seeds {
                    let mut label = style.as_str().to_string();
                    if self.orders.len() > 1 || order == RequirementOrder::Shuffled {
                        label.push('/');
                        label.push_str(&order.to_string());
                    }
                    if let (Some(s), true) = (seed, self.seeds.len() > 1) {
                        label.push_str(&format!("/seed{s}"));
                    }
                    out.push(Condition { label, style, order, seed });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    pub style: Style,
    pub order: RequirementOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Condition {
    /// The requirements as presented to the model. A shuffled condition
    /// uses one permutation for all its attempts.
    pub fn requirements(&self, reqs: &[Requirement]) -> Vec<Requirement> {
        match (self.order, self.seed) {
            (RequirementOrder::Shuffled, Some(seed)) => shuffle_requirements(reqs, seed),
            _ => reqs.to_vec(),
        }
    }

    fn file_stem(&self) -> String {
        self.label.replace('/', "_")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub grade: AttemptGrade,
    /// The graded artifact, absent when generation failed.
    pub artifact: Option<Value>,
    pub generations: Vec<GenerationAttempt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRun {
    pub condition: Condition,
    pub attempts: Vec<AttemptRecord>,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub conditions: Vec<ConditionRun>,
}

impl ExperimentRun {
    pub fn reports(&self) -> Vec<ExperimentReport> {
        self.conditions.iter().map(|c| c.report.clone()).collect()
    }
}

struct Inputs {
    reqs: Vec<Requirement>,
    suite: Suite,
    graph: Option<RoadGraph>,
}

fn load_inputs(spec: &ExperimentSpec) -> Result<Inputs, RunError> {
    let reqs = load_requirements(&spec.path(&spec.dataset))?;
    if reqs.is_empty() {
        return Err(GenerateError::NoRequirements.into());
    }
    let suite = Suite::load(&spec.path(&spec.suite))?;
    let graph = spec.graph.as_ref().map(|g| RoadGraph::load(&spec.path(g))).transpose()?;
    Ok(Inputs { reqs, suite, graph })
}

/// Artifact to grade, code generation flag, and the model calls made.
type AttemptOutput = (Option<Value>, Option<bool>, Vec<GenerationAttempt>);

fn run_attempt(
    ctx: &GenContext<'_>,
    pipeline: ExperimentPipeline,
    reqs: &[Requirement],
    style: Style,
    graph: Option<&RoadGraph>,
    attempt: usize,
) -> Result<AttemptOutput, GenerateError> {
    Ok(match pipeline {
        ExperimentPipeline::Vehicle => {
            let out = generate_vehicle(ctx, reqs, style, attempt)?;
            (out.config.as_ref().map(to_value), None, vec![out.attempt])
        }
        ExperimentPipeline::VehicleGrouped => {
            let out = generate_vehicle_grouped(ctx, reqs, style, attempt)?;
            (out.config.as_ref().map(to_value), None, out.attempts)
        }
        ExperimentPipeline::Preconditions => {
            let graph = graph.expect("validated spec carries a graph");
            let out = generate_preconditions(ctx, reqs, style, graph, attempt)?;
            // an unresolved scene still carries the step-1 parameters, which
            // earn partial credit when placement failed
            (out.scene.as_ref().map(to_value), Some(out.code_gen_ok), out.attempts)
        }
        ExperimentPipeline::Postconditions => {
            let out = generate_postconditions(ctx, reqs, style, attempt)?;
            let artifact = out.checks.map(|c| json!({ "telemetry": to_value(&c) }));
            (artifact, None, vec![out.attempt])
        }
    })
}

/// Runs every condition of the matrix. Attempts run in parallel; results
/// are kept in attempt order so that reports do not depend on scheduling.
pub fn run_experiment(
    spec: &ExperimentSpec,
    assets: &Assets,
    backend: &dyn CompletionBackend,
) -> Result<ExperimentRun, RunError> {
    let inputs = load_inputs(spec)?;
    let ctx = GenContext::new(assets, backend);
    let mut conditions = Vec::new();
    for condition in spec.conditions() {
        let reqs = condition.requirements(&inputs.reqs);
        let attempts = (0..spec.n)
            .into_par_iter()
            .map(|i| {
                let (artifact, code_gen, generations) =
                    run_attempt(&ctx, spec.pipeline, &reqs, condition.style, inputs.graph.as_ref(), i)?;
                let mut g = grade(artifact.as_ref(), &inputs.suite).with_attempt(i);
                if let Some(ok) = code_gen {
                    g = g.with_code_gen(ok);
                }
                Ok(AttemptRecord {
                    grade: g,
                    artifact,
                    generations,
                })
            })
            .collect::<Result<Vec<_>, GenerateError>>()?;
        let grades: Vec<AttemptGrade> = attempts.iter().map(|a| a.grade.clone()).collect();
        let report = ExperimentReport::from_grades(&condition.label, &grades, &spec.k)?;
        conditions.push(ConditionRun {
            condition,
            attempts,
            report,
        });
    }
    Ok(ExperimentRun { conditions })
}

pub fn sha256_file(path: &Path) -> Result<String, RunError> {
    let bytes = std::fs::read(path).map_err(|e| RunError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance of a run: spec, conditions and the hash of every input file,
/// including each replay fixture that was served. Holds no timestamps.
pub fn manifest(spec: &ExperimentSpec, run: &ExperimentRun) -> Result<Value, RunError> {
    let mut inputs = BTreeMap::new();
    for p in [Some(&spec.dataset), Some(&spec.suite), spec.graph.as_ref()].into_iter().flatten() {
        inputs.insert(p.display().to_string(), sha256_file(&spec.path(p))?);
    }
    let mut fixtures = BTreeMap::new();
    if let BackendSpec::Replay { dir } = &spec.backend {
        let replay = ReplayBackend::new(dir);
        for g in run.conditions.iter().flat_map(|c| &c.attempts).flat_map(|a| &a.generations) {
            if g.prompt.is_empty() {
                continue;
            }
            if let Some(path) = replay.fixture_path(&CompletionRequest::new(g.prompt.clone(), g.attempt)) {
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                if let std::collections::btree_map::Entry::Vacant(e) = fixtures.entry(name) {
                    e.insert(sha256_file(&path)?);
                }
            }
        }
    }
    let backend = match &spec.backend {
        BackendSpec::Replay { .. } => json!({"kind": "replay"}),
        BackendSpec::Live { model, temperature } => json!({"kind": "live", "model": model, "temperature": temperature}),
        BackendSpec::Record { model, temperature, .. } => {
            json!({"kind": "record", "model": model, "temperature": temperature})
        }
    };
    Ok(json!({
        "name": spec.name,
        "pipeline": spec.pipeline,
        "n": spec.n,
        "k": spec.k,
        "backend": backend,
        "conditions": run.conditions.iter().map(|c| to_value(&c.condition)).collect::<Vec<_>>(),
        "inputs": inputs,
        "replay_fixtures": fixtures,
    }))
}

/// Writes `manifest.json`, `report.{md,csv,json}` and one attempts file per
/// condition into `dir`. Returns the written paths.
pub fn write_run(spec: &ExperimentSpec, run: &ExperimentRun, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    let attempts_dir = dir.join("attempts");
    std::fs::create_dir_all(&attempts_dir).map_err(|e| RunError::io(&attempts_dir, e))?;
    let reports = run.reports();
    let mut files: Vec<(PathBuf, String)> = vec![(dir.join("manifest.json"), canonical_json(&manifest(spec, run)?))];
    for format in [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json] {
        files.push((dir.join(format!("report.{}", format.extension())), render_report(&reports, format)));
    }
    for c in &run.conditions {
        let path = attempts_dir.join(format!("{}.json", c.condition.file_stem()));
        files.push((path, canonical_json(&to_value(&c.attempts))));
    }
    let mut written = Vec::new();
    for (path, text) in files {
        std::fs::write(&path, text).map_err(|e| RunError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(extra: &str) -> Result<ExperimentSpec, RunError> {
        let text = format!(
            r#"{{"name": "t", "pipeline": "vehicle", "dataset": "d.txt", "suite": "s.json",
                "styles": ["simple", "cot"], "n": 3, "backend": {{"kind": "replay", "dir": "fx"}}{extra}}}"#
        );
        ExperimentSpec::from_json(&text, Path::new("/base"))
    }

    #[test]
    fn paths_resolve_against_the_spec_directory() {
        let s = spec("").unwrap();
        assert_eq!(s.path(&s.dataset), Path::new("/base/d.txt"));
        assert_eq!(s.backend, BackendSpec::Replay { dir: "/base/fx".into() });
        assert_eq!(s.k, DEFAULT_KS);
    }

    #[test]
    fn condition_matrix_and_labels() {
        let labels = |s: &ExperimentSpec| s.conditions().into_iter().map(|c| c.label).collect::<Vec<_>>();
        assert_eq!(labels(&spec("").unwrap()), ["simple", "cot"]);
        let both = spec(r#", "orders": ["ordered", "shuffled"], "seeds": [1, 2]"#).unwrap();
        assert_eq!(
            labels(&both),
            [
                "simple/ordered",
                "simple/shuffled/seed1",
                "simple/shuffled/seed2",
                "cot/ordered",
                "cot/shuffled/seed1",
                "cot/shuffled/seed2"
            ]
        );
        assert_eq!(labels(&both.with_seed(7)).len(), 4);
    }

    #[test]
    fn invalid_specs() {
        assert!(spec(r#", "k": [0]"#).is_err());
        assert!(spec(r#", "seeds": []"#).is_err());
        assert!(spec(r#", "colour": 1"#).is_err());
        let pre = r#"{"name": "t", "pipeline": "preconditions", "dataset": "d", "suite": "s",
            "styles": ["simple"], "n": 1, "backend": {"kind": "replay", "dir": "fx"}}"#;
        assert!(ExperimentSpec::from_json(pre, Path::new(".")).unwrap_err().to_string().contains("graph"));
    }

    #[test]
    fn shuffled_requirements_depend_only_on_the_seed() {
        let text: String = (1..=10).map(|i| format!("[{i}] r{i}\n")).collect();
        let reqs = crate::dataset::parse_requirements(&text).unwrap();
        let c = |order, seed| Condition {
            label: String::new(),
            style: Style::Simple,
            order,
            seed,
        };
        assert_eq!(c(RequirementOrder::Ordered, None).requirements(&reqs), reqs);
        let a = c(RequirementOrder::Shuffled, Some(3)).requirements(&reqs);
        assert_eq!(a, c(RequirementOrder::Shuffled, Some(3)).requirements(&reqs));
        assert_ne!(a, reqs);
    }
}
