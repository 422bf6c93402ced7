mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scenario_forge::eval::ReportFormat;
use scenario_forge::llm::Style;

use commands::{Failure, Outcome};

/// Turns natural-language test requirements into simulator scenarios and
/// grades the results.
///
/// Exit codes: 0 success, 1 usage or missing input, 2 domain failure
/// (invalid document, failed check, generation failure), 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "scenario-forge", version)]
struct Cli {
    /// Directory holding schemas/, catalogs/ and prompts/; defaults to the
    /// source tree the binary was built from.
    #[arg(long, global = true, value_name = "DIR")]
    assets: Option<PathBuf>,
    /// Print a machine-readable JSON result on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for requirement shuffling; overrides the seeds of an experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate one scenario part from a requirements file.
    Generate(GenerateArgs),
    /// Merge a vehicle, a resolved scene and checks into one scenario.
    Merge(MergeArgs),
    /// Evaluate the checks of a scenario against a telemetry trace.
    Check(CheckArgs),
    /// Run an experiment spec and write its reports to a run directory.
    Experiment(ExperimentArgs),
    /// Validate a part or a merged scenario against schemas and catalogs.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartArg {
    Vehicle,
    /// Vehicle generated group by group after a split call.
    VehicleGrouped,
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Replay,
    Live,
    Record,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Replay)]
    pub backend: BackendKind,
    /// Fixture directory for replay and record; defaults to the shipped
    /// fixtures/replay.
    #[arg(long, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,
    /// Model name for live and record.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub part: PartArg,
    /// Requirements file, one `[id] text` per line.
    pub requirements: PathBuf,
    #[arg(long, default_value = "cot", value_parser = parse_style)]
    pub style: Style,
    /// Road graph; required for pre-conditions.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Present the requirements in a seed-determined random order.
    #[arg(long)]
    pub shuffle: bool,
    /// Attempt index, selecting attempt-specific replay fixtures.
    #[arg(long, default_value_t = 0)]
    pub attempt: usize,
    /// Output file; the attempts log goes next to it. Prints to stdout
    /// when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    pub vehicle: PathBuf,
    pub scene: PathBuf,
    pub checks: PathBuf,
    /// Rename a scene agent, as `FROM=TO`; may repeat.
    #[arg(long = "alias", value_name = "FROM=TO")]
    pub aliases: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub scenario: PathBuf,
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub spec: PathBuf,
    /// Run directory for manifest, reports and attempts.
    #[arg(long)]
    pub out: PathBuf,
    /// Format of the report printed on stdout.
    #[arg(long, default_value = "markdown", value_parser = parse_format)]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Vehicle,
    Scene,
    Checks,
    Scenario,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub file: PathBuf,
    /// Document kind; guessed from the top-level keys when absent.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
}

fn parse_style(s: &str) -> Result<Style, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let json = cli.json;
    let result = commands::Context::new(cli.assets.clone(), cli.seed).and_then(|ctx| match cli.command {
        Command::Generate(a) => ctx.generate(a),
        Command::Merge(a) => ctx.merge(a),
        Command::Check(a) => ctx.check(a),
        Command::Experiment(a) => ctx.experiment(a),
        Command::Validate(a) => ctx.validate(a),
    });
    match result {
        Ok(Outcome { ok, text, json: value }) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&value).expect("JSON values serialize"));
            } else {
                print!("{text}");
            }
            ExitCode::from(if ok { 0 } else { 2 })
        }
        Err(f) => {
            eprintln!("error: {f}");
            if json {
                let value = serde_json::json!({"ok": false, "error": f.to_string(), "exit_code": f.code()});
                println!("{}", serde_json::to_string_pretty(&value).expect("JSON values serialize"));
            }
            ExitCode::from(f.code())
        }
    }
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Domain(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}
