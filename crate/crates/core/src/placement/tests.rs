use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::*;
use crate::config::Location;

pub(crate) fn straight_graph(len: f64) -> RoadGraph {
    RoadGraph::from_json(&format!(
        r#"{{"nodes": {{"a": [0,0,0], "b": [{len},0,0]}},
            "edges": [{{"from":"a","to":"b","polyline":[[0,0,0],[{len},0,0]],"lane_width":3.5,"straight":true}}]}}"#
    ))
    .unwrap()
}

const CAR_TO_CAR: &str = r#"
# subject at 20 km/h, lead stationary
let subject_speed = kmh_to_ms(20);
let lead_speed = 0;
let subject_dist_before_test = subject_speed * 2;
let dist_during_test = ttc_to_distance(4, subject_speed, lead_speed);
let route_min_length = subject_dist_before_test + dist_during_test;
let routes = filter_routes_by_length(get_routes_straight(graph), route_min_length);
let selected_route = if len(routes) == 0 then fail("No route matches the distance requirements") else routes[0];
let subject_transform = create_spawnpoint(selected_route, 0, AgentRotation.FORWARD);
let lead_transform = create_spawnpoint(selected_route, route_min_length, FORWARD);
return [selected_route, subject_transform, selected_route[-1], lead_transform, lead_transform.location];
"#;

fn run(src: &str, graph: &RoadGraph) -> Result<PlacementResult, PlacementError> {
    interpret(&parse_program(src)?, graph)
}

#[test]
fn car_to_car_places_lead_at_ttc_gap() {
    let r = run(CAR_TO_CAR, &straight_graph(200.0)).unwrap();
    let subject = &r.agents["subject"];
    let lead = &r.agents["lead"];
    assert!((subject.spawn.x - 0.0).abs() < 1e-9);
    assert!((lead.spawn.x - 33.333).abs() < 0.05, "lead at {}", lead.spawn.x);
    assert!((subject.spawn.z - 0.3).abs() < 1e-9);
    assert_eq!(subject.target, Location::new(200.0, 0.0, 0.0));
    assert_eq!(subject.spawn.yaw, lead.spawn.yaw);
}

#[test]
fn short_road_surfaces_tool_message_verbatim() {
    let err = run(CAR_TO_CAR, &straight_graph(20.0)).unwrap_err();
    assert_eq!(err.to_string(), "No route matches the distance requirements");
}

#[test]
fn empty_record_is_a_shape_error() {
    let err = run("return {};", &straight_graph(50.0)).unwrap_err();
    assert!(matches!(err, PlacementError::ResultShape(_)), "{err:?}");
}

#[test]
fn unknown_tool_is_rejected_with_position() {
    let err = run("let x = 1;\nreturn nonexistent(1);", &straight_graph(50.0)).unwrap_err();
    assert_eq!(
        err,
        PlacementError::UnknownTool {
            name: "nonexistent".into(),
            line: 2,
            column: 8
        }
    );
}

#[test]
fn looping_constructs_do_not_parse() {
    for src in ["while true { }", "for r in routes: pass", "def f(): return 1", "return fn(x) x;"] {
        let err = parse_program(src).unwrap_err();
        assert!(err.is_static(), "{src}: {err:?}");
    }
}

#[test]
fn statement_limit() {
    let mut src = "let x = 1;\n".repeat(MAX_STATEMENTS);
    src.push_str("return x;");
    assert!(matches!(
        parse_program(&src).unwrap_err(),
        PlacementError::TooLarge { .. }
    ));
    let ok = format!("{}return x;", "let x = 1;\n".repeat(MAX_STATEMENTS - 1));
    parse_program(&ok).unwrap();
}

#[test]
fn step_budget_is_enforced() {
    // 400 statements of 40 terms each evaluate about 32,000 nodes
    let line = format!("let x = {}1;\n", "1 + ".repeat(39));
    let src = line.repeat(400) + "return x;";
    let p = parse_program(&src).unwrap();
    let g = straight_graph(10.0);
    let reg = ToolRegistry::standard();
    assert_eq!(
        evaluate(&p, &g, &reg, MAX_STEPS).unwrap_err(),
        PlacementError::BudgetExceeded { budget: MAX_STEPS }
    );
    let small = line.repeat(10) + "return x;";
    let p = parse_program(&small).unwrap();
    assert_eq!(evaluate(&p, &g, &reg, MAX_STEPS).unwrap(), Value::Number(40.0));
}

#[test]
fn deep_nesting_is_a_syntax_error() {
    let chain = format!("return {}1;", "1 + ".repeat(3000));
    assert!(matches!(parse_program(&chain).unwrap_err(), PlacementError::Syntax { .. }));
    let parens = format!("return {}1{};", "(".repeat(3000), ")".repeat(3000));
    assert!(matches!(parse_program(&parens).unwrap_err(), PlacementError::Syntax { .. }));
    let negs = format!("return {}1;", "-".repeat(3000));
    assert!(matches!(parse_program(&negs).unwrap_err(), PlacementError::Syntax { .. }));
}

#[test]
fn division_by_zero_and_type_errors() {
    let g = straight_graph(10.0);
    assert!(matches!(run("return 1 / 0;", &g).unwrap_err(), PlacementError::DivisionByZero { .. }));
    assert!(matches!(run("return 1 + true;", &g).unwrap_err(), PlacementError::Type { .. }));
    assert!(matches!(
        run("return create_spawnpoint(1, 2, FORWARD);", &g).unwrap_err(),
        PlacementError::Type { .. }
    ));
    assert!(matches!(
        run("return kmh_to_ms(1, 2);", &g).unwrap_err(),
        PlacementError::Arity { expected: 1, found: 2, .. }
    ));
    assert!(matches!(run("return y;", &g).unwrap_err(), PlacementError::UnknownVariable { .. }));
    assert!(matches!(run("let graph = 1; return graph;", &g).unwrap_err(), PlacementError::Runtime { .. }));
}

#[test]
fn record_result_with_pedestrian_trigger() {
    let src = r#"
        let route = get_routes_straight(graph)[0];
        let v = kmh_to_ms(20);
        let impact = 2 * v + ttc_to_distance(4, v, 0);
        let trig = crossing_trigger_distance(v, kmh_to_ms(5), 3.5);
        return {
            route: route,
            agents: {
                ego: {spawn: create_spawnpoint(route, 0, FORWARD), target: route[-1]},
                ped: {spawn: create_crossing_spawnpoint(route, impact, 3.5), target: route_point(route, impact, -3.5)},
            },
            trigger: {agent: "ped", watched_agent: "ego", distance_threshold: trig},
        };
    "#;
    let r = run(src, &straight_graph(100.0)).unwrap();
    let ped = &r.agents["ped"];
    assert!((ped.spawn.x - 33.333).abs() < 0.05);
    assert!((ped.spawn.y - 3.5).abs() < 1e-9);
    assert!((ped.spawn.yaw - -90.0).abs() < 1e-9);
    let t = r.trigger.unwrap();
    assert_eq!(t.agent, "ped");
    assert!((t.spec.distance_threshold - 14.0).abs() < 0.01);
}

#[test]
fn spawn_off_the_route_is_rejected() {
    let mut reg = ToolRegistry::standard();
    reg.register(
        ToolSignature {
            name: "anywhere".into(),
            params: vec![],
            returns: SemanticType::Transform,
            doc: "test".into(),
        },
        Arc::new(|_, _| {
            Ok(Value::Transform(crate::config::Transform::at(Location::new(-30.0, 0.3, 0.3), 0.0)))
        }),
    )
    .unwrap();
    let p = parse_program("let r = get_routes_straight(graph)[0]; return [r, anywhere(), r[-1]];").unwrap();
    let err = interpret_with(&p, &straight_graph(100.0), &reg).unwrap_err();
    assert!(matches!(err, PlacementError::ResultShape(_)), "{err:?}");
}

#[test]
fn only_registered_tools_are_reachable() {
    let calls = Arc::new(AtomicUsize::new(0));
    let mut reg = ToolRegistry::empty();
    let c = calls.clone();
    reg.register(
        ToolSignature {
            name: "probe".into(),
            params: vec![("x".into(), SemanticType::Meters)],
            returns: SemanticType::Meters,
            doc: "counts calls".into(),
        },
        Arc::new(move |_, args| {
            c.fetch_add(1, Ordering::SeqCst);
            Ok(args[0].clone())
        }),
    )
    .unwrap();
    let g = straight_graph(10.0);
    let p = parse_program("let a = probe(1); let b = probe(a); return b;").unwrap();
    assert_eq!(evaluate(&p, &g, &reg, MAX_STEPS).unwrap(), Value::Number(1.0));
    assert_eq!(calls.load(Ordering::SeqCst), 2);
    let p = parse_program("return get_routes_straight(graph);").unwrap();
    assert!(matches!(
        evaluate(&p, &g, &reg, MAX_STEPS).unwrap_err(),
        PlacementError::UnknownTool { .. }
    ));
    assert_eq!(calls.load(Ordering::SeqCst), 2);
}

#[test]
fn interpretation_is_deterministic() {
    let g = straight_graph(200.0);
    let p = parse_program(CAR_TO_CAR).unwrap();
    let first = interpret(&p, &g).unwrap();
    for _ in 0..5 {
        assert_eq!(interpret(&p, &g).unwrap(), first);
    }
}

#[test]
fn registry_doc_lists_every_tool_once() {
    let doc = registry_doc();
    let reg = ToolRegistry::standard();
    assert_eq!(doc.lines().count(), reg.len());
    assert!(doc.starts_with("get_routes_straight(graph: graph) -> list of routes: "));
    for name in BUILTINS {
        assert!(reg.get(name).is_none());
    }
}

#[test]
fn apply_fills_scene_by_role() {
    use crate::config::{AgentSpec, SceneConfig};
    let agent = |id: &str, role| AgentSpec {
        id: id.into(),
        role,
        blueprint: "vehicle.tesla.model3".into(),
        target_speed: 20.0,
        spawn: None,
        target: None,
        trigger: None,
    };
    let scene = SceneConfig {
        agents: vec![agent("ego", AgentRole::Subject), agent("target", AgentRole::Lead)],
        weather: "ClearNoon".into(),
        route_min_length: None,
        route: None,
        placement_program: None,
        resolved: false,
    };
    let p = parse_program(CAR_TO_CAR).unwrap();
    let r = interpret(&p, &straight_graph(200.0)).unwrap();
    let out = apply_to_scene(&scene, &r, &p).unwrap();
    assert!(out.resolved && out.all_placed());
    assert_eq!(out.route.as_ref().unwrap().len(), 2);

    let mut lonely = scene.clone();
    lonely.agents.push(agent("other", AgentRole::Lead));
    assert!(matches!(apply_to_scene(&lonely, &r, &p), Err(PlacementError::Apply(_))));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lead_gap_matches_ttc_formula(v in 1.0f64..30.0, ttc in 1.0f64..10.0) {
            let src = format!(
                "let r = get_routes_straight(graph)[0];\n\
                 let d = ttc_to_distance({ttc}, {v}, 0);\n\
                 return [r, create_spawnpoint(r, 0, FORWARD), r[-1], create_spawnpoint(r, d, FORWARD), r[-1]];"
            );
            let r = run(&src, &straight_graph(400.0)).unwrap();
            let gap = r.agents["lead"].spawn.x - r.agents["subject"].spawn.x;
            prop_assert!((gap - v * ttc).abs() < 1e-6);
        }

        #[test]
        fn backward_spawn_faces_opposite(s in 0.0f64..100.0) {
            let g = straight_graph(100.0);
            let reg = ToolRegistry::standard();
            let p = parse_program(&format!(
                "let r = get_routes_straight(graph)[0]; return [create_spawnpoint(r, {s}, FORWARD).yaw, create_spawnpoint(r, {s}, BACKWARD).yaw];"
            )).unwrap();
            let Value::List(items) = evaluate(&p, &g, &reg, MAX_STEPS).unwrap() else { panic!() };
            let (f, b) = (items[0].as_number().unwrap(), items[1].as_number().unwrap());
            prop_assert!(((b - f).abs() - 180.0).abs() < 1e-9);
        }
    }
}

#[test]
fn parse_examples() {
    let p = parse_program("let v = 20 * 1000 / 3600; return {speed: v};").unwrap();
    assert_eq!(p.statements().len(), 2);
    let p = parse_program("let v = 5; return ttc_to_distance(4, v, 0);").unwrap();
    let Stmt::Return { value, .. } = &p.statements()[1] else { panic!() };
    let ExprKind::Call { name, args } = &value.kind else { panic!("{value:?}") };
    assert_eq!((name.as_str(), args.len()), ("ttc_to_distance", 3));
    assert_eq!(p.source(), "let v = 5; return ttc_to_distance(4, v, 0);");
}

#[test]
fn registry_doc_line_counts() {
    assert_eq!(ToolRegistry::empty().doc(), "");
    let mut reg = ToolRegistry::empty();
    for i in 0..8 {
        reg.register(
            ToolSignature {
                name: format!("t{i}"),
                params: vec![],
                returns: SemanticType::Meters,
                doc: "constant".into(),
            },
            Arc::new(|_, _| Ok(Value::Number(1.0))),
        )
        .unwrap();
    }
    assert_eq!(reg.doc().lines().count(), 8);
    assert!(registry_doc().lines().any(|l| l.starts_with("ttc_to_distance(")));
    let dup = reg.register(
        ToolSignature {
            name: "t0".into(),
            params: vec![],
            returns: SemanticType::Meters,
            doc: String::new(),
        },
        Arc::new(|_, _| Ok(Value::Number(1.0))),
    );
    assert!(dup.is_err());
}
