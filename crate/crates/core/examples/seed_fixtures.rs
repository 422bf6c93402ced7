//! Regenerates the derived fixtures: golden scenes, the merged golden
//! scenario and the synthetic replay responses behind the shipped
//! experiment specs.
//!
//! Replay responses are authored here, not recorded from a model. Each
//! condition gets a fixed share of correct answers and a fixed cycle of
//! faults so that the reports show a clear spread between conditions.
//!
//! Run with `cargo run -p scenario-forge --example seed_fixtures`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde_json::{json, Value};

use scenario_forge::assembly::{merge, MergePolicy};
use scenario_forge::assets::{repo_root, Assets, PLACEMENT_GRAMMAR};
use scenario_forge::config::{canonical_json, to_value, ChecksPart, SceneConfig, VehicleConfig};
use scenario_forge::eval::{render_report, run_experiment, ExperimentSpec, ReportFormat, RequirementOrder};
use scenario_forge::llm::{fixture_key, Completion, CompletionBackend, CompletionRequest, LlmError, ReplayBackend, Style};
use scenario_forge::placement::{apply_to_scene, interpret, parse_program};
use scenario_forge::road::RoadGraph;

struct Reply {
    text: String,
    /// Served for every attempt unless an attempt-specific file exists.
    shared: bool,
}

type Responder = Box<dyn Fn(&str, usize) -> Reply + Send + Sync>;

struct SeedBackend {
    dir: PathBuf,
    respond: Responder,
    written: Mutex<BTreeMap<PathBuf, String>>,
}

impl CompletionBackend for SeedBackend {
    fn id(&self) -> String {
        "replay".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let reply = (self.respond)(&request.prompt, request.attempt);
        let hash = fixture_key(&request.prompt);
        let name = if reply.shared {
            format!("{hash}.txt")
        } else {
            format!("{hash}.{}.txt", request.attempt)
        };
        let path = self.dir.join(name);
        let mut written = self.written.lock().unwrap();
        if let Some(previous) = written.get(&path) {
            assert_eq!(previous, &reply.text, "two different shared replies for {}", path.display());
        }
        std::fs::write(&path, &reply.text).unwrap();
        written.insert(path, reply.text.clone());
        Ok(Completion::text(reply.text))
    }
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&read(path)).unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
    println!("wrote {}", path.display());
}

/// Wraps an artifact the way a model would answer in the given style.
fn answer(style: Style, artifact: &str, lang: &str) -> String {
    match style {
        Style::Cot => format!(
            "Let me go through the requirements one by one and map each of them to a field.\n\n\
             Every requirement is covered, so here is the result:\n\n```{lang}\n{artifact}\n```\n"
        ),
        _ => format!("```{lang}\n{artifact}\n```\n"),
    }
}

fn json_answer(style: Style, v: &Value) -> String {
    answer(style, canonical_json(v).trim_end(), "json")
}

const REFUSAL: &str = "I am sorry, but I need more information about the vehicle before I can write its configuration.";

/// Attempts `i` with `(i * 7) % n < correct` are answered correctly; this
/// spreads the correct attempts over the run and always includes attempt 0.
fn is_correct(attempt: usize, n: usize, correct: usize) -> bool {
    (attempt * 7) % n < correct
}

fn sensor_mut<'a>(config: &'a mut Value, id: &str) -> &'a mut Value {
    config["sensors"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|s| s["id"] == id)
        .unwrap_or_else(|| panic!("no sensor {id}"))
}

fn remove_sensor(config: &mut Value, id: &str) {
    config["sensors"].as_array_mut().unwrap().retain(|s| s["id"] != id);
}

fn vehicle_styles(root: &Path, style: Style) -> Responder {
    let golden = read_json(&root.join("fixtures/golden/vehicle_basic.json"));
    let correct = match style {
        Style::Simple => 10,
        Style::Icl => 20,
        Style::Cot => 40,
    };
    Box::new(move |_, attempt| {
        if is_correct(attempt, 50, correct) {
            return Reply {
                text: json_answer(style, &golden),
                shared: true,
            };
        }
        let mut c = golden.clone();
        let text = match attempt % 5 {
            0 => {
                remove_sensor(&mut c, "rear_camera");
                json_answer(style, &c)
            }
            1 => {
                sensor_mut(&mut c, "lidar_front")["transform"]["z"] = json!(1.5);
                json_answer(style, &c)
            }
            2 => {
                let cam = sensor_mut(&mut c, "mid_range_camera");
                cam["attributes"]["image_size_x"] = json!(1600);
                cam["attributes"]["image_size_y"] = json!(900);
                json_answer(style, &c)
            }
            3 => {
                sensor_mut(&mut c, "short_range_camera")["attributes"]["horizontal_fov"] = json!(90);
                json_answer(style, &c)
            }
            _ => REFUSAL.to_string(),
        };
        Reply { text, shared: false }
    })
}

fn vehicle_order(root: &Path, order: RequirementOrder) -> Responder {
    let golden = read_json(&root.join("fixtures/golden/vehicle_extended.json"));
    Box::new(move |_, attempt| {
        if order == RequirementOrder::Ordered || attempt % 10 == 0 {
            return Reply {
                text: json_answer(Style::Cot, &golden),
                shared: true,
            };
        }
        let mut c = golden.clone();
        match attempt % 3 {
            0 => {
                sensor_mut(&mut c, "left_side_rear_camera")["transform"]["yaw"] = json!(120.0);
                sensor_mut(&mut c, "right_side_rear_camera")["transform"]["yaw"] = json!(-120.0);
            }
            1 => remove_sensor(&mut c, "right_side_rear_camera"),
            _ => sensor_mut(&mut c, "left_side_rear_camera")["transform"]["x"] = json!(-1.35),
        }
        Reply {
            text: json_answer(Style::Cot, &c),
            shared: false,
        }
    })
}

fn vehicle_grouped(root: &Path) -> Responder {
    let golden = read_json(&root.join("fixtures/golden/vehicle_tesla.json"));
    let split = json!({
        "vehicle": [1, 2, 33],
        "front_cameras": (3..=9).collect::<Vec<_>>(),
        "side_cameras": (10..=27).collect::<Vec<_>>(),
        "rear_camera": (28..=32).collect::<Vec<_>>(),
    });
    let part = move |ids: &[&str]| {
        let mut c = golden.clone();
        c["sensors"].as_array_mut().unwrap().retain(|s| ids.iter().any(|id| s["id"] == *id));
        c
    };
    Box::new(move |prompt, attempt| {
        if prompt.contains("describe the sensor array") {
            return Reply {
                text: json_answer(Style::Simple, &split),
                shared: true,
            };
        }
        let (mut c, faulty) = if prompt.contains("[7] The wide front camera") {
            (part(&["front_wide_camera", "front_main_camera", "front_narrow_camera"]), false)
        } else if prompt.contains("[11] The left forward-looking") {
            let ids = [
                "left_forward_side_camera",
                "right_forward_side_camera",
                "left_rearward_side_camera",
                "right_rearward_side_camera",
            ];
            (part(&ids), attempt % 5 == 4)
        } else if prompt.contains("[28] The ego vehicle should have a rear camera") {
            (part(&["rear_camera"]), attempt % 7 == 3)
        } else {
            panic!("unexpected grouped prompt:\n{prompt}");
        };
        if !faulty {
            return Reply {
                text: json_answer(Style::Cot, &c),
                shared: true,
            };
        }
        if c["sensors"].as_array().unwrap().len() == 1 {
            sensor_mut(&mut c, "rear_camera")["attributes"]["sensor_tick"] = json!(0.1);
        } else {
            sensor_mut(&mut c, "left_rearward_side_camera")["transform"]["yaw"] = json!(120.0);
        }
        Reply {
            text: json_answer(Style::Cot, &c),
            shared: false,
        }
    })
}

/// Python source, which the placement language does not accept.
const PYTHON_PLACEMENT: &str = "def position_agents(graph: nx.Graph) -> list:\n    \
    subject_speed = 20 * 1000 / 3600\n    \
    routes = get_routes_straight(graph)\n    \
    return [routes[0], create_spawnpoint(routes[0], 0, AgentRotation.FORWARD)]";

fn car_to_car(root: &Path, style: Style) -> Responder {
    let step1 = read_json(&root.join("fixtures/scenes/car_to_car.step1.json"));
    let program = read(&root.join("fixtures/programs/car_to_car.plc"));
    Box::new(move |prompt, attempt| {
        let faults: &[usize] = match style {
            Style::Simple => &[1, 2, 3, 4],
            _ => &[4],
        };
        let fault = Some(attempt % 5).filter(|f| faults.contains(f));
        if !prompt.contains(PLACEMENT_GRAMMAR.trim()) {
            if style == Style::Simple && fault == Some(4) {
                let mut wet = step1.clone();
                wet["weather"] = json!("WetNoon");
                return Reply {
                    text: json_answer(style, &wet),
                    shared: false,
                };
            }
            return Reply {
                text: json_answer(style, &step1),
                shared: true,
            };
        }
        let text = match fault {
            Some(1) | Some(3) => PYTHON_PLACEMENT.to_string(),
            Some(2) => program.replace("let ttc = 4;", "let ttc = 2;"),
            Some(4) if style != Style::Simple => program.replace(
                "subject_dist_before_test + dist_during_test, AgentRotation.FORWARD",
                "subject_dist_before_test + dist_during_test, AgentRotation.BACKWARD",
            ),
            _ => {
                return Reply {
                    text: answer(style, program.trim_end(), ""),
                    shared: true,
                }
            }
        };
        Reply {
            text: answer(style, text.trim_end(), ""),
            shared: false,
        }
    })
}

fn car_to_pedestrian(root: &Path, style: Style) -> Responder {
    let step1 = read_json(&root.join("fixtures/scenes/car_to_pedestrian.step1.json"));
    let program = read(&root.join("fixtures/programs/car_to_pedestrian.plc"));
    Box::new(move |prompt, attempt| {
        if !prompt.contains(PLACEMENT_GRAMMAR.trim()) {
            return Reply {
                text: json_answer(style, &step1),
                shared: true,
            };
        }
        let fault = match style {
            Style::Simple => attempt % 4,
            _ => usize::from(attempt % 10 == 5),
        };
        let text = match fault {
            0 => {
                return Reply {
                    text: answer(style, program.trim_end(), ""),
                    shared: true,
                }
            }
            1 => PYTHON_PLACEMENT.to_string(),
            2 => program.replace("let lateral = 3.5;", "let lateral = 0;"),
            _ => program.replace(
                "distance_threshold: crossing_trigger_distance(subject_speed, pedestrian_speed, lateral)",
                "distance_threshold: 10",
            ),
        };
        Reply {
            text: answer(style, text.trim_end(), ""),
            shared: false,
        }
    })
}

fn postconditions(root: &Path, style: Style) -> Responder {
    let golden = read_json(&root.join("fixtures/checks/car_to_pedestrian.json"));
    let correct = match style {
        Style::Simple => 12,
        Style::Icl => 16,
        Style::Cot => 19,
    };
    Box::new(move |_, attempt| {
        if is_correct(attempt, 20, correct) {
            return Reply {
                text: json_answer(style, &golden),
                shared: true,
            };
        }
        let mut c = golden.clone();
        let checks = c["telemetry"].as_array_mut().unwrap();
        match attempt % 3 {
            0 => checks.iter_mut().find(|ch| ch["sensor"] == "brake").unwrap()["value"] = json!(0.5),
            1 => checks.retain(|ch| ch["sensor"] != "collision"),
            _ => checks.iter_mut().find(|ch| ch["id"] == "ID_END_SPEED").unwrap()["begin"] = json!("simulation_end"),
        }
        Reply {
            text: json_answer(style, &c),
            shared: false,
        }
    })
}

fn responder(root: &Path, file: &str, style: Style, order: RequirementOrder) -> Responder {
    match file {
        "vehicle_styles.json" => vehicle_styles(root, style),
        "vehicle_order.json" => vehicle_order(root, order),
        "vehicle_grouped.json" => vehicle_grouped(root),
        "car_to_car.json" => car_to_car(root, style),
        "car_to_pedestrian.json" => car_to_pedestrian(root, style),
        "postconditions.json" => postconditions(root, style),
        other => panic!("no responses authored for {other}"),
    }
}

fn golden_scene(root: &Path, name: &str, graph: &RoadGraph) -> SceneConfig {
    let step1: SceneConfig = serde_json::from_str(&read(&root.join(format!("fixtures/scenes/{name}.step1.json")))).unwrap();
    let program = parse_program(&read(&root.join(format!("fixtures/programs/{name}.plc")))).unwrap();
    let placed = interpret(&program, graph).unwrap();
    apply_to_scene(&step1, &placed, &program).unwrap()
}

fn main() {
    let root = repo_root().canonicalize().unwrap();
    let assets = Assets::shipped();

    let graph = RoadGraph::load(&root.join("fixtures/graphs/straight_200m.json")).unwrap();
    let golden = root.join("fixtures/golden");
    let mut pedestrian_scene = None;
    for name in ["car_to_car", "car_to_pedestrian"] {
        let scene = golden_scene(&root, name, &graph);
        assert!(assets.validator.check(&to_value(&scene), scenario_forge::config::PartKind::Scene).is_empty());
        write(&golden.join(format!("scene_{name}.json")), &canonical_json(&to_value(&scene)));
        if name == "car_to_pedestrian" {
            pedestrian_scene = Some(scene);
        }
    }
    let vehicle: VehicleConfig = serde_json::from_str(&read(&golden.join("vehicle_basic.json"))).unwrap();
    let checks: ChecksPart = serde_json::from_str(&read(&root.join("fixtures/checks/car_to_pedestrian.json"))).unwrap();
    let doc = merge(&vehicle, &pedestrian_scene.unwrap(), &checks.telemetry, &MergePolicy::default()).unwrap();
    write(&golden.join("scenario_car_to_pedestrian.json"), &canonical_json(&to_value(&doc)));

    let replay = root.join("fixtures/replay");
    std::fs::create_dir_all(&replay).unwrap();
    for entry in std::fs::read_dir(&replay).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "txt") {
            std::fs::remove_file(path).unwrap();
        }
    }

    let mut specs: Vec<PathBuf> = std::fs::read_dir(root.join("fixtures/experiments"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    specs.sort();
    for path in &specs {
        let spec = ExperimentSpec::load(path).unwrap();
        let file = path.file_name().unwrap().to_str().unwrap();
        for condition in spec.conditions() {
            let mut single = spec.clone();
            single.styles = vec![condition.style];
            single.orders = vec![condition.order];
            if let Some(seed) = condition.seed {
                single.seeds = vec![seed];
            }
            let backend = SeedBackend {
                dir: replay.clone(),
                respond: responder(&root, file, condition.style, condition.order),
                written: Mutex::new(BTreeMap::new()),
            };
            run_experiment(&single, &assets, &backend).unwrap();
        }
        // the replayed run must see exactly what was seeded
        let run = run_experiment(&spec, &assets, &ReplayBackend::new(&replay)).unwrap();
        println!("\n{file}\n{}", render_report(&run.reports(), ReportFormat::Markdown));
    }
    let count = std::fs::read_dir(&replay).unwrap().count();
    println!("{count} replay fixtures in {}", replay.display());
}
