use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use surfc_core::chip::{ChipConfig, Model};
use surfc_core::circuit::{GateDag, LogicalCircuit};
use surfc_core::harness::{
    self, compare, describe_layout, describe_mapping, prepare, run_circuit, summarize, sweep, write_csv, CircuitSource,
    CutKind, GeneratorSpec, HarnessError, MappingKind, RunConfig, SchedulerKind, SweepOptions, SweepPlan,
};
use surfc_core::oracle::{optimal_cycles, OracleBudget, OracleError};
use surfc_core::profiler::para_finding;

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "surfc", version, about = "Map and schedule CNOT circuits on surface-code chips")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical path, gate count and parallelism estimate.
    Profile(RunArgs),
    /// Chip layout queries.
    Chip {
        #[command(subcommand)]
        action: ChipCommand,
    },
    /// Qubit placement and initial cuts.
    Map(RunArgs),
    /// Full compile: layout, placement, schedule, validation.
    Schedule(RunArgs),
    /// Exact optimum for a tiny instance, next to the heuristic result.
    Oracle(RunArgs),
    /// Runs every config of a TOML sweep plan and writes CSV.
    Sweep(SweepArgs),
    /// Cycle reduction of report B over report A, in percent.
    Compare { a: PathBuf, b: PathBuf },
}

#[derive(Subcommand)]
enum ChipCommand {
    /// Rows, columns, channel bandwidths and capacity as JSON.
    Describe(RunArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// OpenQASM file, or a `.json` circuit dump.
    input: Option<PathBuf>,
    /// Generated circuit, e.g. `ghz:n=23` or `random:n=16,depth=20,parallelism=4`.
    #[arg(long = "gen", value_name = "SPEC", conflicts_with = "input")]
    generator: Option<GeneratorSpec>,
    /// TOML run config; flags given here override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_name = "dd|ls")]
    model: Option<Model>,
    #[arg(long, value_name = "min|4x|sufficient|WxH|bwK")]
    chip: Option<ChipConfig>,
    /// Code distance.
    #[arg(short = 'd', value_name = "DIST")]
    distance: Option<usize>,
    #[arg(long)]
    scheduler: Option<SchedulerKind>,
    #[arg(long)]
    mapping: Option<MappingKind>,
    #[arg(long)]
    cuts: Option<CutKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Placement trials for the Ecmas mapping.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep plan.
    #[arg(long)]
    config: PathBuf,
    /// Row CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-group means (over seeds) to this CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Compile-time samples per row; the median is reported.
    #[arg(long, default_value_t = 3)]
    timing_runs: usize,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = match error.downcast_ref::<HarnessError>() {
            Some(h) if h.is_infeasible() => EXIT_INFEASIBLE,
            _ => match error.downcast_ref::<OracleError>() {
                Some(OracleError::Infeasible { .. }) => EXIT_INFEASIBLE,
                _ => EXIT_USAGE,
            },
        };
        Failure { code, error }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", render(&f.error));
            ExitCode::from(f.code)
        }
    }
}

/// The error chain, skipping causes already spelled out by their wrapper.
fn render(error: &anyhow::Error) -> String {
    let mut text = error.to_string();
    for cause in error.chain().skip(1) {
        let c = cause.to_string();
        if !text.ends_with(&c) {
            text = format!("{text}: {c}");
        }
    }
    text
}

fn dispatch(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Profile(args) => profile(&args),
        Command::Chip { action: ChipCommand::Describe(args) } => {
            let (config, circuit) = resolve(&args)?;
            let p = prepare(&config, &circuit)?;
            emit(&args.out, &serde_json::to_value(describe_layout(&p.layout))?)?;
            Ok(0)
        }
        Command::Map(args) => {
            let (config, circuit) = resolve(&args)?;
            let p = prepare(&config, &circuit)?;
            let entries = describe_mapping(&p.mapping, &p.cuts);
            match args.format {
                Format::Json => emit(&args.out, &serde_json::to_value(entries)?)?,
                Format::Csv => emit_csv(&args.out, &entries)?,
            }
            Ok(0)
        }
        Command::Schedule(args) => schedule(&args),
        Command::Oracle(args) => oracle(&args),
        Command::Sweep(args) => run_sweep(&args),
        Command::Compare { a, b } => {
            let (ra, rb) = (read_report(&a)?, read_report(&b)?);
            let pct = compare(&ra, &rb)?;
            println!("{}", json!({ "delta_a": ra.delta, "delta_b": rb.delta, "reduction_percent": round1(pct) }));
            Ok(0)
        }
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Merges the config file, the circuit arguments and the flag overrides.
fn resolve(args: &RunArgs) -> Result<(RunConfig, LogicalCircuit)> {
    let source = match (&args.input, &args.generator) {
        (Some(path), None) => Some(CircuitSource::File { file: path.clone() }),
        (None, Some(g)) => Some(CircuitSource::Generated(g.clone())),
        _ => None,
    };
    let mut config = match (&args.config, source) {
        (Some(path), source) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut c = RunConfig::from_toml(&text)?;
            if let Some(s) = source {
                c.circuit = s;
            }
            c
        }
        (None, Some(source)) => RunConfig::new(source, args.model.unwrap_or(Model::DoubleDefect)),
        (None, None) => bail!("give a circuit file, --gen or --config"),
    };
    if let Some(m) = args.model {
        config.model = m;
    }
    if let Some(c) = args.chip {
        config.chip = c;
    }
    if let Some(d) = args.distance {
        config.d = d;
    }
    if let Some(s) = args.scheduler {
        config.scheduler = s;
    }
    if let Some(m) = args.mapping {
        config.mapping = m;
    }
    if let Some(c) = args.cuts {
        config.cuts = c;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    config.check()?;
    let circuit = config.circuit.load(config.seed)?;
    Ok((config, circuit))
}

fn profile(args: &RunArgs) -> Result<u8, Failure> {
    let (_, circuit) = resolve(args)?;
    let dag = GateDag::build(&circuit);
    let layers = para_finding(&dag);
    let v = json!({
        "n": circuit.n(),
        "alpha": dag.alpha(),
        "g": circuit.len(),
        "pm_estimate": layers.pm(),
        "layers": layers.layers(),
    });
    emit(&args.out, &v)?;
    Ok(0)
}

fn schedule(args: &RunArgs) -> Result<u8, Failure> {
    let (config, circuit) = resolve(args)?;
    let out = run_circuit(&config, &circuit)?;
    match args.format {
        Format::Json => {
            let v = json!({
                "report": out.report,
                "mapping": describe_mapping(&out.mapping, &out.initial_cuts),
                "schedule": out.export,
            });
            emit(&args.out, &v)?;
        }
        Format::Csv => {
            let rows = sweep(&[config], SweepOptions { workers: Some(1), timing_runs: 1 })?;
            emit_csv(&args.out, &rows)?;
        }
    }
    if out.report.valid {
        Ok(0)
    } else {
        for v in &out.report.violations {
            eprintln!("violation: {v}");
        }
        Ok(EXIT_INVALID)
    }
}

fn oracle(args: &RunArgs) -> Result<u8, Failure> {
    let (config, circuit) = resolve(args)?;
    let budget = OracleBudget::default();
    let p = prepare(&config, &circuit)?;
    let cuts = (!p.cuts.is_empty()).then_some(&p.cuts[..]);
    let optimum = optimal_cycles(&circuit, &p.layout, &p.mapping, cuts, &budget)?;
    let free = match cuts {
        Some(_) => Some(optimal_cycles(&circuit, &p.layout, &p.mapping, None, &budget)?),
        None => None,
    };
    let heuristic = run_circuit(&config, &circuit).ok().map(|o| o.report.delta);
    let v = json!({
        "alpha": p.alpha,
        "optimal": optimum,
        "optimal_any_cuts": free,
        "heuristic": heuristic,
    });
    emit(&args.out, &v)?;
    Ok(0)
}

fn run_sweep(args: &SweepArgs) -> Result<u8, Failure> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let plan = SweepPlan::from_toml(&text)?;
    let configs = plan.expand()?;
    let options = SweepOptions { workers: args.workers.or(plan.workers), timing_runs: args.timing_runs };
    let rows = sweep(&configs, options)?;
    emit_csv(&args.out, &rows)?;
    if let Some(path) = &args.summary {
        write_csv(&summarize(&rows), fs::File::create(path)?)?;
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed", rows.len());
    }
    Ok(0)
}

fn read_report(path: &Path) -> Result<harness::RunReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(inner) = v.get_mut("report") {
        v = inner.take();
    }
    serde_json::from_value(v).with_context(|| format!("{} is not a run report", path.display()))
}

fn emit(out: &Option<PathBuf>, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            writeln!(io::stdout().lock(), "{text}")?;
            Ok(())
        }
    }
}

fn emit_csv<T: serde::Serialize>(out: &Option<PathBuf>, rows: &[T]) -> Result<()> {
    match out {
        Some(path) => write_csv(rows, fs::File::create(path).with_context(|| format!("writing {}", path.display()))?)?,
        None => write_csv(rows, io::stdout().lock())?,
    }
    Ok(())
}
