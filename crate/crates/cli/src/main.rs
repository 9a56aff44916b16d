use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causaldx::detection::DetectionError;
use causaldx::pipeline::{self, braces, to_json, PipelineError, RunOptions};
use causaldx::text::ParseError;
use causaldx::value::{parse_value, Compact};
use causaldx::{
    closure, detect_misbehaving, islands, oracle, simulate, Assignment, CausalGraph, SearchStrategy, Value, VariableId,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "causaldx",
    version,
    about = "Consistency-based diagnosis of causal influence models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the all-OK model from the observed input values
    Simulate(Common),
    /// List misbehaving variables
    Detect(Common),
    /// Show the islands around misbehaving variables, or the closure of the given targets
    Closure {
        #[command(flatten)]
        common: Common,
        #[arg(long = "target")]
        targets: Vec<String>,
    },
    /// Minimal conflicts
    Conflicts(Common),
    /// Minimal conflicts and minimal diagnoses
    Diagnose(Common),
    #[command(hide = true)]
    OracleConflicts(Common),
    #[command(hide = true)]
    OracleDiagnose(Common),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Approx,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// Model file
    #[arg(short, long)]
    model: PathBuf,
    /// Observation file
    #[arg(short, long)]
    obs: PathBuf,
    /// Detection threshold
    #[arg(long, value_parser = parse_value)]
    delta: Option<Value>,
    /// Verification tolerance
    #[arg(long, value_parser = parse_value)]
    tol: Option<Value>,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    max_size: Option<usize>,
    #[arg(long)]
    max_count: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

impl Common {
    fn options(&self) -> RunOptions {
        let default = match self.mode {
            Mode::Exact => Value::default(),
            Mode::Approx => causaldx::value::ratio(1, 1_000_000),
        };
        RunOptions {
            delta: self.delta.clone().unwrap_or_else(|| default.clone()),
            strategy: SearchStrategy {
                max_order: self.max_order,
                max_size: self.max_size,
                max_count: self.max_count,
                tolerance: self.tol.clone().unwrap_or(default),
            },
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        let code = if matches!(e, ParseError::Invalid(_)) { 2 } else { 1 };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<DetectionError> for Failure {
    fn from(e: DetectionError) -> Self {
        let code = match e {
            DetectionError::SelfContradiction(_) => 3,
            DetectionError::Model(causaldx::model::ModelError::Cycle(_)) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Detection(d) => d.into(),
            other => Self::usage(other),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load(common: &Common) -> Result<(CausalGraph, Assignment), Failure> {
    let graph = causaldx::parse_model(&read(&common.model)?).map_err(|e| Failure::from(e).prefixed(&common.model))?;
    let obs = causaldx::parse_observations(&read(&common.obs)?).map_err(|e| Failure::from(e).prefixed(&common.obs))?;
    Ok((graph, obs))
}

impl Failure {
    fn prefixed(self, path: &Path) -> Self {
        Self {
            message: format!("{}: {}", path.display(), self.message),
            ..self
        }
    }
}

fn emit(format: Format, json: impl FnOnce() -> String, text: impl FnOnce() -> String) -> String {
    match format {
        Format::Json => json(),
        Format::Text => text(),
    }
}

fn assignment_text(values: &Assignment) -> String {
    values.iter().map(|(k, v)| format!("{k} = {}\n", Compact(v))).collect()
}

fn set_lists(sets: &[BTreeSet<causaldx::ComponentId>]) -> String {
    let mut out = String::new();
    for s in sets {
        let _ = writeln!(out, "  {}", braces(s));
    }
    out
}

fn run(command: Command) -> Result<String, Failure> {
    match command {
        Command::Simulate(c) => {
            let (g, obs) = load(&c)?;
            let inputs = obs.restricted(|v| g.is_input(v));
            let values = simulate(&g, &inputs)?;
            Ok(emit(c.format, || to_json(&values), || assignment_text(&values)))
        }
        Command::Detect(c) => {
            let (g, obs) = load(&c)?;
            let report = detect_misbehaving(&g, &obs, &c.options().delta)?;
            Ok(emit(
                c.format,
                || to_json(&report),
                || {
                    let mut out = String::new();
                    pipeline::write_misbehaviour(&mut out, &report);
                    out
                },
            ))
        }
        Command::Closure { common: c, targets } => {
            let (g, obs) = load(&c)?;
            let report = detect_misbehaving(&g, &obs, &c.options().delta)?;
            let closures = if targets.is_empty() {
                islands(&g, &obs, &report.misbehaving).map_err(Failure::usage)?
            } else {
                let targets: BTreeSet<VariableId> = targets.into_iter().map(VariableId::new).collect();
                vec![closure(&g, &obs, &report.misbehaving, &targets).map_err(Failure::usage)?]
            };
            Ok(emit(
                c.format,
                || to_json(&closures),
                || {
                    let mut out = String::new();
                    for (n, cl) in closures.iter().enumerate() {
                        let _ = writeln!(out, "closure {}: variables {}", n + 1, braces(&cl.subgraph.variables));
                        let _ = writeln!(out, "  boundary {}", braces(&cl.boundary));
                        let _ = writeln!(out, "  influences {}", braces(&cl.subgraph.influences));
                    }
                    out
                },
            ))
        }
        Command::Conflicts(c) => {
            let (g, obs) = load(&c)?;
            let run = pipeline::diagnose(&g, &obs, &c.options())?;
            Ok(emit(
                c.format,
                || {
                    #[derive(serde::Serialize)]
                    struct Out<'a> {
                        conflicts: &'a [causaldx::ConflictSet],
                        stats: &'a causaldx::SearchStats,
                    }
                    to_json(&Out {
                        conflicts: &run.conflicts,
                        stats: &run.stats,
                    })
                },
                || {
                    let mut out = String::new();
                    pipeline::write_conflicts(&mut out, &run.conflicts);
                    out
                },
            ))
        }
        Command::Diagnose(c) => {
            let (g, obs) = load(&c)?;
            let run = pipeline::diagnose(&g, &obs, &c.options())?;
            Ok(emit(c.format, || run.to_json(), || run.to_text()))
        }
        Command::OracleConflicts(c) => {
            let (g, obs) = load(&c)?;
            let sets = oracle::oracle_conflicts(&g, &obs).map_err(Failure::usage)?;
            Ok(emit(
                c.format,
                || to_json(&serde_json::json!({ "conflicts": sets })),
                || format!("conflicts: {}\n{}", sets.len(), set_lists(&sets)),
            ))
        }
        Command::OracleDiagnose(c) => {
            let (g, obs) = load(&c)?;
            let sets = oracle::oracle_conflicts(&g, &obs).map_err(Failure::usage)?;
            let diagnoses = oracle::oracle_hitting_sets(&sets).map_err(Failure::usage)?;
            Ok(emit(
                c.format,
                || to_json(&serde_json::json!({ "conflicts": sets, "diagnoses": diagnoses })),
                || {
                    let mut out = format!("conflicts: {}\n{}", sets.len(), set_lists(&sets));
                    pipeline::write_diagnoses(&mut out, &diagnoses);
                    out
                },
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
