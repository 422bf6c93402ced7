use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::assets::repo_root;
use crate::config::{CheckValue, ChecksPart, Operator, TelemetryCheck, Unit};

fn units() -> BTreeMap<String, Unit> {
    [
        ("speed", Unit::KilometersPerHour),
        ("brake", Unit::MetersPerSecondSquared),
        ("collision", Unit::Boolean),
    ]
    .into_iter()
    .map(|(k, u)| (k.to_string(), u))
    .collect()
}

fn trace(name: &str) -> TelemetryTrace {
    load_trace(&repo_root().join("fixtures/traces").join(name)).unwrap()
}

fn reference_checks() -> Vec<TelemetryCheck> {
    let text = std::fs::read_to_string(repo_root().join("fixtures/checks/car_to_pedestrian.json")).unwrap();
    serde_json::from_str::<ChecksPart>(&text).unwrap().telemetry
}

fn check(id: &str) -> TelemetryCheck {
    reference_checks().into_iter().find(|c| c.id == id).unwrap()
}

fn failing(report: &CheckReport) -> Vec<&str> {
    report.results.iter().filter(|r| !r.passed).map(|r| r.id.as_str()).collect()
}

#[test]
fn nominal_fixture_loads() {
    let t = trace("nominal.json");
    assert_eq!(t.signals.keys().collect::<Vec<_>>(), ["brake", "collision", "speed"]);
    assert_eq!(t.events.len(), 5);
    assert_eq!(t.dt, 0.05);
}

#[test]
fn malformed_traces_are_rejected() {
    let base = r#"{"dt": 0.1, "signals": {"speed": {"unit": "km/h", "samples": SAMPLES}}, "events": EVENTS}"#;
    let make = |s: &str, e: &str| base.replace("SAMPLES", s).replace("EVENTS", e);
    assert!(TelemetryTrace::from_json(&make("[[0, 1], [0.1, 2]]", "{}")).is_ok());
    let err = TelemetryTrace::from_json(&make("[[0.1, 1], [0, 2]]", "{}")).unwrap_err();
    assert!(err.to_string().contains("does not increase"), "{err}");
    let no_unit = r#"{"dt": 0.1, "signals": {"speed": {"samples": [[0, 1]]}}, "events": {}}"#;
    assert!(matches!(TelemetryTrace::from_json(no_unit), Err(TraceError::Format(_))));
    assert!(TelemetryTrace::from_json(&make("[[0, true]]", "{}")).is_err());
    assert!(TelemetryTrace::from_json(&make("[[0, 1], [0.1, 2]]", r#"{"late": [5]}"#)).is_err());
    assert!(TelemetryTrace::from_json(&make("[[0, 1], [0.1, 2]]", r#"{"e": [0.1, 0]}"#)).is_err());
    assert!(TelemetryTrace::from_json(&make("[]", "{}")).is_err());
}

#[test]
fn windows_use_first_occurrence() {
    let mut t = trace("nominal.json");
    let w = resolve_window(&check("ID_BRAKING_FORCE"), &t).unwrap();
    assert_eq!(w, Window::Range { t_begin: 5.0, t_end: 5.95 });
    assert_eq!(resolve_window(&check("ID_TARGET_SPEED"), &t).unwrap(), Window::Point { t: 2.0 });
    t.events.insert("braking_start_aeb".into(), vec![5.0, 7.0]);
    assert_eq!(resolve_window(&check("ID_BRAKING_FORCE"), &t).unwrap(), w);
    t.events.remove("braking_start_aeb");
    let err = resolve_window(&check("ID_BRAKING_FORCE"), &t).unwrap_err();
    assert_eq!(err, CheckError::MissingEvent("braking_start_aeb".into()));
    let mut inverted = check("ID_COLLISION");
    inverted.begin = "simulation_end".into();
    assert!(matches!(resolve_window(&inverted, &trace("nominal.json")), Err(CheckError::InvertedWindow { .. })));
}

#[test]
fn single_checks_on_nominal_trace() {
    let t = trace("nominal.json");
    for id in ["ID_BRAKING_FORCE", "ID_END_SPEED", "ID_COLLISION", "ID_TARGET_SPEED"] {
        let r = evaluate_check(&check(id), &t, &units()).unwrap();
        assert!(r.passed, "{id}: {}", r.message);
        assert!(r.witness.is_none());
    }
}

#[test]
fn collision_failure_has_a_witness() {
    let r = evaluate_check(&check("ID_COLLISION"), &trace("collision.json"), &units()).unwrap();
    assert!(!r.passed);
    let w = r.witness.unwrap();
    assert_eq!(w.t, 5.5);
    assert_eq!(w.value, CheckValue::Bool(true));
}

#[test]
fn reference_checks_pass_on_nominal_trace() {
    let report = evaluate_all(&reference_checks(), &trace("nominal.json"), &units());
    assert_eq!(report.summary(), "4/4 passed");
    assert!(report.all_passed());
}

#[test]
fn each_perturbation_fails_exactly_its_check() {
    for (file, id) in [
        ("brake_4ms2.json", "ID_BRAKING_FORCE"),
        ("end_speed_3kmh.json", "ID_END_SPEED"),
        ("collision.json", "ID_COLLISION"),
        ("cruise_15kmh.json", "ID_TARGET_SPEED"),
    ] {
        let report = evaluate_all(&reference_checks(), &trace(file), &units());
        assert_eq!(failing(&report), [id], "{file}");
        assert_eq!(report.summary(), "3/4 passed");
    }
}

#[test]
fn empty_check_list_and_evaluation_errors() {
    let report = evaluate_all(&[], &trace("nominal.json"), &units());
    assert_eq!((report.passed, report.total), (0, 0));
    let mut c = check("ID_END_SPEED");
    c.begin = "lights_on".into();
    let report = evaluate_all(&[c], &trace("nominal.json"), &units());
    assert_eq!(report.results[0].message, "event `lights_on` does not occur in the trace");
    assert!(!report.results[0].passed);
}

#[test]
fn point_check_picks_nearest_sample_earlier_on_tie() {
    let t = TelemetryTrace::from_json(
        r#"{"dt": 1, "signals": {"speed": {"unit": "km/h", "samples": [[0, 10], [1, 20]]}},
            "events": {"mid": [0.5], "late": [0.75]}}"#,
    )
    .unwrap();
    let mut c = check("ID_TARGET_SPEED");
    c.begin = "mid".into();
    c.value = CheckValue::Number(10.0);
    assert!(evaluate_check(&c, &t, &units()).unwrap().passed);
    c.begin = "late".into();
    assert!(!evaluate_check(&c, &t, &units()).unwrap().passed);
}

#[test]
fn trace_units_are_converted_to_catalog_units() {
    let mut t = trace("nominal.json");
    let speed = t.signals["speed"].converted(Unit::MetersPerSecond).unwrap();
    t.signals.insert("speed".into(), speed);
    assert_eq!(evaluate_all(&reference_checks(), &t, &units()).summary(), "4/4 passed");
    let mut c = check("ID_BRAKING_FORCE");
    c.sensor = "speed".into();
    let mut u = units();
    u.insert("speed".into(), Unit::MetersPerSecondSquared);
    assert!(matches!(evaluate_check(&c, &t, &u), Err(CheckError::Conversion { .. })));
}

#[test]
fn explicit_tolerance_overrides_default() {
    let t = trace("end_speed_3kmh.json");
    let mut c = check("ID_END_SPEED");
    assert!(!evaluate_check(&c, &t, &units()).unwrap().passed);
    c.tolerance = Some(3.0);
    assert!(evaluate_check(&c, &t, &units()).unwrap().passed);
}

fn synthetic(values: &[f64], unit: Unit, begin: usize, end: usize) -> TelemetryTrace {
    let samples = values
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 * 0.1, CheckValue::Number(*v)))
        .collect();
    let mut signals = BTreeMap::new();
    signals.insert("speed".to_string(), Signal { unit, samples });
    let mut events = BTreeMap::new();
    events.insert("b".to_string(), vec![begin as f64 * 0.1]);
    events.insert("e".to_string(), vec![end as f64 * 0.1]);
    TelemetryTrace {
        dt: 0.1,
        signals,
        events,
        metadata: BTreeMap::new(),
    }
}

fn range_check(op: Operator, value: f64, end: Option<&str>) -> TelemetryCheck {
    TelemetryCheck {
        id: "p".into(),
        sensor: "speed".into(),
        begin: "b".into(),
        end: end.map(str::to_string),
        operator: op,
        value: CheckValue::Number(value),
        tolerance: None,
    }
}

fn operator() -> impl Strategy<Value = Operator> {
    prop::sample::select(vec![Operator::Eq, Operator::Ne, Operator::Ge, Operator::Le, Operator::Gt, Operator::Lt])
}

proptest! {
    #[test]
    fn shrinking_a_window_never_breaks_a_passing_check(
        values in prop::collection::vec(prop::sample::select(vec![0.0, 10.0, 20.0, 20.05, 30.0]), 4..30),
        op in operator(),
        expected in prop::sample::select(vec![0.0, 10.0, 20.0, 30.0]),
        cuts in (0usize..100, 0usize..100, 0usize..100, 0usize..100),
    ) {
        let n = values.len();
        let mut outer = [cuts.0 % n, cuts.1 % n];
        outer.sort();
        let mut inner = [outer[0] + cuts.2 % (outer[1] - outer[0] + 1), outer[0] + cuts.3 % (outer[1] - outer[0] + 1)];
        inner.sort();
        let c = range_check(op, expected, Some("e"));
        let wide = evaluate_check(&c, &synthetic(&values, Unit::KilometersPerHour, outer[0], outer[1]), &units()).unwrap();
        let narrow = evaluate_check(&c, &synthetic(&values, Unit::KilometersPerHour, inner[0], inner[1]), &units()).unwrap();
        prop_assert!(!wide.passed || narrow.passed);
    }

    #[test]
    fn converting_the_trace_to_ms_keeps_every_verdict(
        values in prop::collection::vec(prop::sample::select(vec![0.0, 5.0, 19.9, 20.0, 20.1, 36.0, 72.0]), 2..20),
        op in operator(),
        expected in prop::sample::select(vec![0.0, 20.0, 36.0]),
        point in any::<bool>(),
    ) {
        let end = values.len() - 1;
        let kmh = synthetic(&values, Unit::KilometersPerHour, 0, end);
        let ms_values: Vec<f64> = values.iter().map(|v| v / 3.6).collect();
        let ms = synthetic(&ms_values, Unit::MetersPerSecond, 0, end);
        let c = range_check(op, expected, (!point).then_some("e"));
        let a = evaluate_check(&c, &kmh, &units()).unwrap();
        let b = evaluate_check(&c, &ms, &units()).unwrap();
        prop_assert_eq!(a.passed, b.passed);
    }

    #[test]
    fn report_counts_are_consistent(n in 0usize..8, op in operator(), expected in 0.0f64..40.0) {
        let t = trace("nominal.json");
        let checks: Vec<_> = (0..n).map(|i| {
            let mut c = range_check(op, expected, if i % 2 == 0 { Some("braking_end_aeb") } else { None });
            c.begin = "simulation_start".into();
            c
        }).collect();
        let a = evaluate_all(&checks, &t, &units());
        prop_assert!(a.passed <= a.total);
        prop_assert_eq!(a.total, n);
        prop_assert_eq!(a, evaluate_all(&checks, &t, &units()));
    }
}
