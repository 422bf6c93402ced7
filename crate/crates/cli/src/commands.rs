use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use scenario_forge::assembly::{merge, verify_document, MergePolicy};
use scenario_forge::assets::{repo_root, Assets};
use scenario_forge::config::{canonical_json, to_value, ConfigError, GenerationMeta, PartKind, ScenarioDocument, Violation};
use scenario_forge::dataset::{parse_requirements, shuffle_requirements};
use scenario_forge::eval::{render_report, run_experiment, write_run, BackendSpec, ExperimentSpec, RunError};
use scenario_forge::generate::{
    generate_postconditions, generate_preconditions, generate_vehicle, generate_vehicle_grouped, GenContext,
    GenerationAttempt,
};
use scenario_forge::road::RoadGraph;
use scenario_forge::telemetry::{evaluate_all, TelemetryTrace};

use crate::{BackendArgs, BackendKind, CheckArgs, ExperimentArgs, GenerateArgs, KindArg, MergeArgs, PartArg, ValidateArgs};

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Io(String),
}

/// What a command prints: `text` normally, `json` under `--json`. A
/// command that ran but found a problem returns `ok: false` (exit 2).
pub struct Outcome {
    pub ok: bool,
    pub text: String,
    pub json: Value,
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Failure::Usage(format!("input file {} does not exist", path.display())),
        _ => Failure::Io(format!("failed to read {}: {e}", path.display())),
    })
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::Io(format!("failed to create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("failed to write {}: {e}", path.display())))
}

fn parse_json(path: &Path) -> Result<Value, Failure> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| Failure::Domain(format!("{} is not valid JSON: {e}", path.display())))
}

fn violation_lines(violations: &[Violation]) -> String {
    violations.iter().map(|v| format!("  {v}\n")).collect()
}

/// `vehicle.json` -> `vehicle.attempts.json`.
fn attempts_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.attempts.json"))
}

fn run_error(e: RunError) -> Failure {
    match e {
        RunError::Io { ref source, .. } if source.kind() == ErrorKind::NotFound => Failure::Usage(e.to_string()),
        RunError::Io { .. } => Failure::Io(e.to_string()),
        RunError::Dataset(scenario_forge::dataset::DatasetError::Io { ref source, .. })
            if source.kind() == ErrorKind::NotFound =>
        {
            Failure::Usage(e.to_string())
        }
        RunError::Suite(scenario_forge::eval::SuiteError::Io { ref source, .. }) if source.kind() == ErrorKind::NotFound => {
            Failure::Usage(e.to_string())
        }
        RunError::Spec(_) => Failure::Usage(e.to_string()),
        other => Failure::Domain(other.to_string()),
    }
}

pub struct Context {
    assets: Assets,
    seed: Option<u64>,
}

impl Context {
    pub fn new(assets: Option<PathBuf>, seed: Option<u64>) -> Result<Self, Failure> {
        let root = assets.unwrap_or_else(repo_root);
        let assets = Assets::load(&root).map_err(|e| match &e {
            ConfigError::Io { source, .. } if source.kind() == ErrorKind::NotFound => Failure::Usage(e.to_string()),
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        })?;
        Ok(Self { assets, seed })
    }

    fn backend_spec(&self, args: &BackendArgs) -> Result<BackendSpec, Failure> {
        let fixtures = || {
            args.fixtures
                .clone()
                .unwrap_or_else(|| self.assets.root.join("fixtures/replay"))
        };
        let model = || {
            args.model
                .clone()
                .ok_or_else(|| Failure::Usage("--model is required for the live and record backends".into()))
        };
        Ok(match args.backend {
            BackendKind::Replay => BackendSpec::Replay { dir: fixtures() },
            BackendKind::Live => BackendSpec::Live {
                model: model()?,
                temperature: args.temperature,
            },
            BackendKind::Record => BackendSpec::Record {
                model: model()?,
                dir: fixtures(),
                temperature: args.temperature,
            },
        })
    }

    pub fn generate(&self, a: GenerateArgs) -> Result<Outcome, Failure> {
        let text = read_input(&a.requirements)?;
        let mut reqs = parse_requirements(&text)
            .map_err(|e| Failure::Domain(format!("{}: {e}", a.requirements.display())))?;
        if a.shuffle {
            reqs = shuffle_requirements(&reqs, self.seed.unwrap_or(0));
        }
        let graph = match (a.part, &a.graph) {
            (PartArg::Pre, None) => return Err(Failure::Usage("pre-condition generation needs --graph".into())),
            (PartArg::Pre, Some(path)) => {
                read_input(path)?;
                Some(RoadGraph::load(path).map_err(|e| Failure::Domain(e.to_string()))?)
            }
            _ => None,
        };
        let backend = self.backend_spec(&a.backend)?.build().map_err(run_error)?;
        let ctx = GenContext::new(&self.assets, backend.as_ref());
        let gen_err = |e: scenario_forge::generate::GenerateError| Failure::Domain(e.to_string());

        let (artifact, attempts, mut problems): (Option<Value>, Vec<GenerationAttempt>, Vec<String>) = match a.part {
            PartArg::Vehicle => {
                let out = generate_vehicle(&ctx, &reqs, a.style, a.attempt).map_err(gen_err)?;
                (out.config.as_ref().map(to_value), vec![out.attempt], vec![])
            }
            PartArg::VehicleGrouped => {
                let out = generate_vehicle_grouped(&ctx, &reqs, a.style, a.attempt).map_err(gen_err)?;
                (out.config.as_ref().map(to_value), out.attempts, out.errors)
            }
            PartArg::Pre => {
                let graph = graph.as_ref().expect("checked above");
                let out = generate_preconditions(&ctx, &reqs, a.style, graph, a.attempt).map_err(gen_err)?;
                let mut problems = vec![];
                if out.scene.as_ref().is_some_and(|s| !s.resolved) {
                    problems.push("the scene could not be resolved".to_string());
                }
                (out.scene.as_ref().map(to_value), out.attempts, problems)
            }
            PartArg::Post => {
                let out = generate_postconditions(&ctx, &reqs, a.style, a.attempt).map_err(gen_err)?;
                let artifact = out.checks.map(|c| json!({ "telemetry": to_value(&c) }));
                (artifact, vec![out.attempt], vec![])
            }
        };
        for attempt in &attempts {
            problems.extend(attempt.errors.iter().map(|e| format!("{}: {e}", attempt.pipeline)));
        }
        if artifact.is_none() && problems.is_empty() {
            problems.push("no artifact was generated".into());
        }
        let ok = artifact.is_some() && problems.is_empty();

        let mut text = String::new();
        if let Some(out) = &a.out {
            if let Some(v) = &artifact {
                write_output(out, &canonical_json(v))?;
                let _ = writeln!(text, "wrote {}", out.display());
            }
            let log = attempts_path(out);
            write_output(&log, &canonical_json(&to_value(&attempts)))?;
            let _ = writeln!(text, "wrote {}", log.display());
        } else if let Some(v) = &artifact {
            text.push_str(&canonical_json(v));
        }
        for p in &problems {
            eprintln!("{p}");
        }
        Ok(Outcome {
            ok,
            text,
            json: json!({
                "ok": ok,
                "part": artifact,
                "errors": problems,
                "attempts": attempts.iter().map(GenerationAttempt::meta).map(|m| to_value(&m)).collect::<Vec<_>>(),
            }),
        })
    }

    pub fn merge(&self, a: MergeArgs) -> Result<Outcome, Failure> {
        let v = &self.assets.validator;
        let vehicle = v.parse_vehicle(&read_input(&a.vehicle)?).map_err(|e| parse_failure(&a.vehicle, e))?;
        let scene = v.parse_scene(&read_input(&a.scene)?).map_err(|e| parse_failure(&a.scene, e))?;
        let checks = v.parse_checks(&read_input(&a.checks)?).map_err(|e| parse_failure(&a.checks, e))?;
        let mut policy = MergePolicy::default();
        for alias in &a.aliases {
            let (from, to) = alias
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--alias `{alias}` is not FROM=TO")))?;
            policy.aliases.insert(from.trim().into(), to.trim().into());
        }
        let mut doc = merge(&vehicle, &scene, &checks.telemetry, &policy).map_err(|e| Failure::Domain(e.to_string()))?;
        doc.provenance = provenance(&[("vehicle", &a.vehicle), ("scene", &a.scene), ("checks", &a.checks)])?;
        let violations = verify_document(&doc, v);
        if !violations.is_empty() {
            return Err(Failure::Domain(format!(
                "merged scenario is invalid:\n{}",
                violation_lines(&violations).trim_end()
            )));
        }
        let text = canonical_json(&to_value(&doc));
        let printed = match &a.out {
            Some(out) => {
                write_output(out, &text)?;
                format!("wrote {}\n", out.display())
            }
            None => text,
        };
        Ok(Outcome {
            ok: true,
            text: printed,
            json: json!({"ok": true, "scenario": to_value(&doc)}),
        })
    }

    pub fn check(&self, a: CheckArgs) -> Result<Outcome, Failure> {
        let doc: ScenarioDocument = serde_json::from_value(parse_json(&a.scenario)?)
            .map_err(|e| Failure::Domain(format!("{} is not a scenario: {e}", a.scenario.display())))?;
        let trace = TelemetryTrace::from_json(&read_input(&a.trace)?)
            .map_err(|e| Failure::Domain(format!("{}: {e}", a.trace.display())))?;
        let report = evaluate_all(&doc.checks, &trace, &self.assets.validator.catalogs.signals);

        let rows: Vec<[String; 4]> = report
            .results
            .iter()
            .map(|r| {
                [
                    r.id.clone(),
                    if r.passed { "PASS" } else { "FAIL" }.to_string(),
                    r.window.map(|w| w.to_string()).unwrap_or_else(|| "-".into()),
                    r.message.clone(),
                ]
            })
            .collect();
        let header = ["check", "result", "window", "detail"];
        let widths: Vec<usize> = (0..4)
            .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
            .collect();
        let mut text = String::new();
        for row in std::iter::once(header.map(String::from)).chain(rows) {
            let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(text, "{}", line.join("  ").trim_end());
        }
        let _ = writeln!(text, "{}", report.summary());
        Ok(Outcome {
            ok: report.all_passed(),
            text,
            json: json!({"ok": report.all_passed(), "summary": report.summary(), "report": to_value(&report)}),
        })
    }

    pub fn experiment(&self, a: ExperimentArgs) -> Result<Outcome, Failure> {
        read_input(&a.spec)?;
        let mut spec = ExperimentSpec::load(&a.spec).map_err(run_error)?;
        if let Some(seed) = self.seed {
            spec = spec.with_seed(seed);
        }
        let backend = spec.backend.build().map_err(run_error)?;
        let run = run_experiment(&spec, &self.assets, backend.as_ref()).map_err(run_error)?;
        let written = write_run(&spec, &run, &a.out).map_err(run_error)?;
        let reports = run.reports();
        let mut text = render_report(&reports, a.format);
        let _ = writeln!(text, "\nwrote {} files to {}", written.len(), a.out.display());
        Ok(Outcome {
            ok: true,
            text,
            json: json!({"ok": true, "reports": to_value(&reports), "run_dir": a.out.display().to_string()}),
        })
    }

    pub fn validate(&self, a: ValidateArgs) -> Result<Outcome, Failure> {
        let value = parse_json(&a.file)?;
        let is_scenario = value.get("vehicle").is_some() && value.get("scene").is_some();
        let kind = match a.kind {
            Some(k) => k,
            None if is_scenario => KindArg::Scenario,
            None => match PartKind::detect(&value) {
                Some(PartKind::Vehicle) => KindArg::Vehicle,
                Some(PartKind::Scene) => KindArg::Scene,
                Some(PartKind::Checks) => KindArg::Checks,
                None => {
                    return Err(Failure::Usage(format!(
                        "cannot tell what kind of document {} is; pass --kind",
                        a.file.display()
                    )))
                }
            },
        };
        let v = &self.assets.validator;
        let (label, violations) = match kind {
            KindArg::Vehicle => ("vehicle", v.check(&value, PartKind::Vehicle)),
            KindArg::Scene => ("scene", v.check(&value, PartKind::Scene)),
            KindArg::Checks => ("checks", v.check(&value, PartKind::Checks)),
            KindArg::Scenario => {
                let doc: ScenarioDocument = serde_json::from_value(value)
                    .map_err(|e| Failure::Domain(format!("{} is not a scenario: {e}", a.file.display())))?;
                ("scenario", verify_document(&doc, v))
            }
        };
        let ok = violations.is_empty();
        let text = if ok {
            format!("{}: valid {label}\n", a.file.display())
        } else {
            format!(
                "{}: {} violation(s)\n{}",
                a.file.display(),
                violations.len(),
                violation_lines(&violations)
            )
        };
        Ok(Outcome {
            ok,
            text,
            json: json!({"ok": ok, "kind": label, "violations": to_value(&violations)}),
        })
    }
}

fn parse_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Domain(format!("{}: {e}", path.display()))
}

/// Reads the attempts log written next to each generated part, if any, and
/// records how the part was produced.
fn provenance(parts: &[(&str, &PathBuf)]) -> Result<BTreeMap<String, GenerationMeta>, Failure> {
    let mut out = BTreeMap::new();
    for (name, path) in parts {
        let log = attempts_path(path);
        if !log.is_file() {
            continue;
        }
        let attempts: Vec<GenerationAttempt> = serde_json::from_str(&read_input(&log)?)
            .map_err(|e| Failure::Domain(format!("{}: {e}", log.display())))?;
        if let Some(last) = attempts.last() {
            out.insert(name.to_string(), last.meta());
        }
    }
    Ok(out)
}
