//! Acceptance criteria for the offline pipeline. Prints one PASS/FAIL line
//! per criterion and exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use scenario_forge::assembly::{merge, verify_document, MergePolicy, COLLISION_BLUEPRINT};
use scenario_forge::assets::{repo_root, Assets};
use scenario_forge::config::ScenarioDocument;
use scenario_forge::dataset::load_requirements;
use scenario_forge::eval::{grade, grade_detailed, pass_at_k, run_experiment, write_run, ExperimentSpec, Suite};
use scenario_forge::generate::{generate_postconditions, generate_preconditions, generate_vehicle, GenContext};
use scenario_forge::llm::{network_requests, ReplayBackend, Style};
use scenario_forge::placement::{interpret, parse_program};
use scenario_forge::road::RoadGraph;
use scenario_forge::telemetry::{evaluate_all, TelemetryTrace};

/// Reference values are given to two decimals.
const TABLE_TOLERANCE: f64 = 0.005;
const ORACLE_TOLERANCE: f64 = 1e-12;
/// Placement position tolerance, metres.
const GEOMETRY_TOLERANCE: f64 = 0.05;
const PASS_AT_K_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const E2E_BUDGET: Duration = Duration::from_secs(5);

fn fixture(rel: &str) -> PathBuf {
    repo_root().join("fixtures").join(rel)
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn pass_at_k_reproduction() -> Outcome {
    let start = Instant::now();
    let cases = [(50, 5, 5, 0.42), (50, 5, 10, 0.69), (50, 5, 20, 0.93), (50, 40, 1, 0.80)];
    let mut got = vec![];
    for (n, c, k, expected) in cases {
        let v = pass_at_k(n, c, k).map_err(|e| e.to_string())?;
        ensure(
            (v - expected).abs() <= TABLE_TOLERANCE,
            format!("pass@{k}(n={n}, c={c}) = {v:.4}, expected {expected} ± {TABLE_TOLERANCE}"),
        )?;
        got.push(format!("pass@{k}(n={n},c={c})={v:.4}"));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < PASS_AT_K_BUDGET, format!("took {elapsed:?}"))?;
    Ok(got.join(", "))
}

/// Fraction of k-subsets of n attempts, the first c of them correct, that
/// contain at least one correct attempt.
fn enumerate_pass_at_k(n: usize, c: usize, k: usize) -> f64 {
    let correct_mask: u32 = (1u32 << c) - 1;
    let (mut hits, mut total) = (0u64, 0u64);
    for subset in 0u32..(1u32 << n) {
        if subset.count_ones() as usize != k {
            continue;
        }
        total += 1;
        if subset & correct_mask != 0 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

fn pass_at_k_oracle() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    for n in 1..=12 {
        for c in 0..=n {
            for k in 1..=n {
                let closed = pass_at_k(n, c, k).map_err(|e| e.to_string())?;
                let brute = enumerate_pass_at_k(n, c, k);
                ensure(
                    (closed - brute).abs() <= ORACLE_TOLERANCE,
                    format!("n={n} c={c} k={k}: closed form {closed} vs enumeration {brute}"),
                )?;
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < ORACLE_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("{cases} cases in {:.0?}", elapsed))
}

fn geometry_golden() -> Outcome {
    let graph = RoadGraph::load(&fixture("graphs/straight_200m.json")).map_err(|e| e.to_string())?;
    let program = parse_program(&read(&fixture("programs/car_to_car.plc"))).map_err(|e| e.to_string())?;
    let result = interpret(&program, &graph).map_err(|e| e.to_string())?;
    let station = |key: &str| -> Result<f64, String> {
        let a = result.agents.get(key).ok_or(format!("no `{key}` in placement"))?;
        Ok(result.route.project(a.spawn.location()).0)
    };
    let gap = station("lead")? - station("subject")?;
    let expected = 100.0 / 9.0 + 200.0 / 9.0;
    ensure(
        (gap - expected).abs() <= GEOMETRY_TOLERANCE,
        format!("lead is {gap:.3} m ahead, expected {expected:.3} ± {GEOMETRY_TOLERANCE}"),
    )?;
    Ok(format!("lead {gap:.3} m ahead of subject"))
}

fn golden_config_grading() -> Outcome {
    let suite = Suite::load(&fixture("suites/vehicle_basic.json")).map_err(|e| e.to_string())?;
    let mut golden: serde_json::Value =
        serde_json::from_str(&read(&fixture("golden/vehicle_basic.json"))).map_err(|e| e.to_string())?;
    let g = grade(Some(&golden), &suite);
    ensure(g.tpr == 1.0, format!("golden TPR {} (failed {:?})", g.tpr, g.failed))?;

    let sensors = golden["sensors"].as_array_mut().ok_or("golden has no sensors array")?;
    let before = sensors.len();
    sensors.retain(|s| s["id"] != "rear_camera");
    ensure(sensors.len() + 1 == before, "golden has no single rear_camera")?;

    let failed: Vec<String> = grade_detailed(Some(&golden), &suite)
        .into_iter()
        .filter(|o| !o.passed)
        .map(|o| o.id)
        .collect();
    let rear: Vec<String> = suite
        .assertions
        .iter()
        .filter(|a| a.requirement.is_some_and(|r| (22..=27).contains(&r)))
        .map(|a| a.id.clone())
        .collect();
    ensure(!rear.is_empty(), "suite has no rear-camera assertions")?;
    ensure(failed == rear, format!("without rear camera failed {failed:?}, expected {rear:?}"))?;
    Ok(format!("TPR 1.0; removing rear_camera fails exactly {} rear assertions", rear.len()))
}

fn telemetry_oracle() -> Outcome {
    let assets = Assets::shipped();
    let doc: ScenarioDocument = serde_json::from_str(&read(&fixture("golden/scenario_car_to_pedestrian.json")))
        .map_err(|e| e.to_string())?;
    let units = &assets.validator.catalogs.signals;
    let cases = [
        ("nominal", None),
        ("brake_4ms2", Some("ID_BRAKING_FORCE")),
        ("end_speed_3kmh", Some("ID_END_SPEED")),
        ("collision", Some("ID_COLLISION")),
        ("cruise_15kmh", Some("ID_TARGET_SPEED")),
    ];
    for (name, expected_failure) in cases {
        let trace = TelemetryTrace::from_json(&read(&fixture(&format!("traces/{name}.json"))))
            .map_err(|e| format!("{name}: {e}"))?;
        let report = evaluate_all(&doc.checks, &trace, units);
        ensure(report.results.len() == 4, format!("{name}: {} checks, expected 4", report.results.len()))?;
        let failed: Vec<&str> = report.results.iter().filter(|r| !r.passed).map(|r| r.id.as_str()).collect();
        let expected: Vec<&str> = expected_failure.into_iter().collect();
        ensure(failed == expected, format!("{name}: failed {failed:?}, expected {expected:?}"))?;
    }
    Ok("nominal 4/4; each perturbation fails exactly its check".into())
}

fn offline_end_to_end() -> Outcome {
    let start = Instant::now();
    let requests_before = network_requests();
    let assets = Assets::shipped();
    let backend = ReplayBackend::new(fixture("replay"));
    let ctx = GenContext::new(&assets, &backend);
    let reqs = |name: &str| load_requirements(&fixture(&format!("datasets/{name}.txt"))).map_err(|e| e.to_string());

    let vehicle = generate_vehicle(&ctx, &reqs("vehicle_basic")?, Style::Cot, 0)
        .map_err(|e| e.to_string())?
        .config
        .ok_or("vehicle generation produced nothing")?;
    let graph = RoadGraph::load(&fixture("graphs/straight_200m.json")).map_err(|e| e.to_string())?;
    let scene = generate_preconditions(&ctx, &reqs("car_to_pedestrian")?, Style::Icl, &graph, 0)
        .map_err(|e| e.to_string())?
        .scene
        .ok_or("scene generation produced nothing")?;
    let checks = generate_postconditions(&ctx, &reqs("postconditions")?, Style::Cot, 0)
        .map_err(|e| e.to_string())?
        .checks
        .ok_or("check generation produced nothing")?;

    let doc = merge(&vehicle, &scene, &checks, &MergePolicy::default()).map_err(|e| e.to_string())?;
    let violations = verify_document(&doc, &assets.validator);
    ensure(violations.is_empty(), format!("violations: {violations:?}"))?;
    let collision = doc.vehicle.sensors.iter().filter(|s| s.blueprint == COLLISION_BLUEPRINT).count();
    ensure(collision == 1, format!("{collision} collision sensors"))?;
    let requests = network_requests() - requests_before;
    ensure(requests == 0, format!("{requests} network requests"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < E2E_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("valid document, 1 collision sensor, 0 requests, {:.0?}", elapsed))
}

fn experiment_specs() -> Vec<PathBuf> {
    let mut specs: Vec<PathBuf> = std::fs::read_dir(fixture("experiments"))
        .expect("experiments directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    specs.sort();
    specs
}

fn run_all(out: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let assets = Assets::shipped();
    let mut files = vec![];
    for spec_path in experiment_specs() {
        let spec = ExperimentSpec::load(&spec_path).map_err(|e| e.to_string())?;
        let backend = spec.backend.build().map_err(|e| e.to_string())?;
        let run = run_experiment(&spec, &assets, backend.as_ref()).map_err(|e| format!("{}: {e}", spec.name))?;
        let dir = out.join(&spec.name);
        for path in write_run(&spec, &run, &dir).map_err(|e| e.to_string())? {
            let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
            files.push((path.strip_prefix(out).unwrap().to_path_buf(), bytes));
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_all(a.path())?;
    let second = run_all(b.path())?;
    ensure(!first.is_empty(), "no files written")?;
    let names = |v: &[(PathBuf, Vec<u8>)]| v.iter().map(|f| f.0.clone()).collect::<Vec<_>>();
    ensure(names(&first) == names(&second), "runs wrote different file sets")?;
    for ((path, x), (_, y)) in first.iter().zip(&second) {
        ensure(x == y, format!("{} differs between runs", path.display()))?;
    }
    Ok(format!("{} specs, {} files byte-identical", experiment_specs().len(), first.len()))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("pass@k reproduction", pass_at_k_reproduction),
        ("pass@k oracle equivalence", pass_at_k_oracle),
        ("geometry golden", geometry_golden),
        ("golden config grading", golden_config_grading),
        ("telemetry oracle", telemetry_oracle),
        ("offline end-to-end", offline_end_to_end),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
