//! End-to-end runs, parameter sweeps and report comparison.
//!
//! A [`RunConfig`] names a circuit (file or generator), a chip configuration
//! and the strategy for each stage. [`run`] profiles, lays out, maps,
//! schedules and validates; [`sweep`] does that for many configs in parallel
//! and tabulates the results.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::chip::{config_dims, Axis, ChipConfig, ChipError, ChipLayout, ChipSpec, Cut, Model, SlackPolicy};
use crate::circuit::generators;
use crate::circuit::qasm::parse_qasm;
use crate::circuit::{CircuitDump, CommGraph, GateDag, LogicalCircuit};
use crate::placement::{
    adjust_bandwidth, determine_shape, establish_mapping, init_cut_types, mapping_cost, max_cut_cuts, random_cuts, random_mapping,
    repair_routability, snake_mapping, unroutable_edges, ArrayShape, PlacementError, TileMapping,
};
use crate::profiler::para_finding;
use crate::router::RoutingGraph;
use crate::scheduler::{
    schedule_limited, schedule_sufficient, validate, EncodedSchedule, GateOrder, LimitedOptions, SameCutPolicy,
    ScheduleDoc, ScheduleError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("circuit: {0}")]
    Circuit(String),
    #[error("chip: {0}")]
    Chip(#[from] ChipError),
    #[error("placement: {0}")]
    Placement(#[from] PlacementError),
    #[error("schedule: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("compare: {0}")]
    Mismatch(String),
}

impl HarnessError {
    /// True when the inputs are well formed but no schedule exists for them.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            HarnessError::Schedule(ScheduleError::Unroutable { .. } | ScheduleError::Insufficient { .. } | ScheduleError::Batch { .. })
                | HarnessError::Chip(ChipError::NoSufficientChip { .. })
                | HarnessError::Placement(PlacementError::NoShape { .. })
        )
    }
}

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($(#[$vm:meta])* $variant:ident = $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($(#[$vm])* $variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                let s = s.to_ascii_lowercase();
                $name::ALL.iter().copied().find(|v| v.name() == s).ok_or_else(|| {
                    let names: Vec<&str> = $name::ALL.iter().map(|v| v.name()).collect();
                    format!("unknown value `{s}` (expected one of {})", names.join(", "))
                })
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.name())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

named_enum!(
    /// Scheduling strategy.
    SchedulerKind {
        /// Layer-per-cycle when the chip capacity covers the parallelism
        /// estimate, list scheduling otherwise.
        Ecmas = "ecmas",
        Limited = "limited",
        Resu = "resu",
        CircuitOrder = "circuit-order",
        TimeFirst = "time-first",
        ChannelFirst = "channel-first",
    }
);

named_enum!(MappingKind { Ecmas = "ecmas", Snake = "snake", Random = "random" });

named_enum!(CutKind { Ecmas = "ecmas", Random = "random", MaxCut = "maxcut" });

/// Benchmark and synthetic circuit generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// Layered random circuit; `seed` defaults to the run seed.
    Random { n: usize, depth: usize, parallelism: usize, seed: Option<u64> },
    Ghz { n: usize },
    /// Secret defaults to alternating bits, starting with qubit 0.
    Bv { n: usize, secret: Option<u64> },
    Qft { n: usize },
    Ising { n: usize, steps: usize },
    WState { n: usize },
    SwapTest { n: usize },
    QpeLike { n: usize, gates: usize },
}

impl GeneratorSpec {
    pub fn label(&self) -> String {
        match self {
            GeneratorSpec::Random { n, depth, parallelism, .. } => format!("random-n{n}-d{depth}-p{parallelism}"),
            GeneratorSpec::Ghz { n } => format!("ghz-n{n}"),
            GeneratorSpec::Bv { n, .. } => format!("bv-n{n}"),
            GeneratorSpec::Qft { n } => format!("qft-n{n}"),
            GeneratorSpec::Ising { n, steps } => format!("ising-n{n}-s{steps}"),
            GeneratorSpec::WState { n } => format!("wstate-n{n}"),
            GeneratorSpec::SwapTest { n } => format!("swaptest-n{n}"),
            GeneratorSpec::QpeLike { n, gates } => format!("qpe-n{n}-g{gates}"),
        }
    }

    pub fn build(&self, run_seed: u64) -> Result<LogicalCircuit, HarnessError> {
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { Err(HarnessError::Circuit(what.to_string())) };
        Ok(match *self {
            GeneratorSpec::Random { n, depth, parallelism, seed } => {
                generators::random_layered(n, depth, parallelism, seed.unwrap_or(run_seed))
                    .map_err(|e| HarnessError::Circuit(e.to_string()))?
            }
            GeneratorSpec::Ghz { n } => generators::ghz(n),
            GeneratorSpec::Bv { n, secret } => {
                need(n >= 2, "bv needs n >= 2")?;
                generators::bernstein_vazirani(n, secret.unwrap_or(0x5555_5555_5555_5555))
            }
            GeneratorSpec::Qft { n } => generators::qft(n),
            GeneratorSpec::Ising { n, steps } => generators::ising(n, steps),
            GeneratorSpec::WState { n } => generators::w_state(n),
            GeneratorSpec::SwapTest { n } => {
                need(n >= 3 && n % 2 == 1, "swap-test needs an odd n >= 3")?;
                generators::swap_test(n)
            }
            GeneratorSpec::QpeLike { n, gates } => {
                need(n >= 2, "qpe-like needs n >= 2")?;
                generators::qpe_like(n, gates)
            }
        })
    }
}

/// Compact form `name:key=value,key=value`, e.g. `random:n=16,depth=20,parallelism=4`.
impl FromStr for GeneratorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let mut text = format!("generator = {:?}\n", name.trim());
        for kv in params.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected key=value, got `{kv}`"))?;
            let v: u64 = v.trim().parse().map_err(|_| format!("`{k}` needs a non-negative integer"))?;
            text.push_str(&format!("{} = {v}\n", k.trim()));
        }
        toml::from_str(&text).map_err(|e| format!("generator `{s}`: {}", e.message()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CircuitSource {
    /// OpenQASM 2 text, or the JSON circuit dump when the name ends in `.json`.
    File { file: PathBuf },
    Inline { name: String, inline: CircuitDump },
    Generated(GeneratorSpec),
}

impl CircuitSource {
    pub fn label(&self) -> String {
        match self {
            CircuitSource::File { file } => file.file_stem().map_or_else(|| file.display().to_string(), |s| s.to_string_lossy().into_owned()),
            CircuitSource::Inline { name, .. } => name.clone(),
            CircuitSource::Generated(g) => g.label(),
        }
    }

    pub fn load(&self, seed: u64) -> Result<LogicalCircuit, HarnessError> {
        match self {
            CircuitSource::File { file } => load_circuit_file(file),
            CircuitSource::Inline { inline, .. } => {
                LogicalCircuit::from_dump(inline).map_err(|e| HarnessError::Circuit(e.to_string()))
            }
            CircuitSource::Generated(g) => g.build(seed),
        }
    }
}

pub fn load_circuit_file(path: &Path) -> Result<LogicalCircuit, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let dump: CircuitDump = serde_json::from_str(&text).map_err(|e| HarnessError::Circuit(e.to_string()))?;
        LogicalCircuit::from_dump(&dump).map_err(|e| HarnessError::Circuit(e.to_string()))
    } else {
        parse_qasm(&text).map_err(|e| HarnessError::Circuit(format!("{}: {e}", path.display())))
    }
}

fn de_from_str<'de, D, T>(d: D) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr<Err = String>,
{
    String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
}

fn ser_display<S: Serializer, T: fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: CircuitSource,
    #[serde(deserialize_with = "de_from_str", serialize_with = "ser_display")]
    pub model: Model,
    #[serde(default = "default_chip", deserialize_with = "de_from_str", serialize_with = "ser_display")]
    pub chip: ChipConfig,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_scheduler")]
    pub scheduler: SchedulerKind,
    #[serde(default = "default_mapping")]
    pub mapping: MappingKind,
    #[serde(default = "default_cuts")]
    pub cuts: CutKind,
    #[serde(default)]
    pub seed: u64,
    /// Independent placement trials for the Ecmas mapping.
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_chip() -> ChipConfig {
    ChipConfig::MinimumViable
}
fn default_d() -> usize {
    3
}
fn default_scheduler() -> SchedulerKind {
    SchedulerKind::Ecmas
}
fn default_mapping() -> MappingKind {
    MappingKind::Ecmas
}
fn default_cuts() -> CutKind {
    CutKind::Ecmas
}
fn default_trials() -> usize {
    16
}

impl RunConfig {
    pub fn new(circuit: CircuitSource, model: Model) -> Self {
        RunConfig {
            circuit,
            model,
            chip: default_chip(),
            d: default_d(),
            scheduler: default_scheduler(),
            mapping: default_mapping(),
            cuts: default_cuts(),
            seed: 0,
            trials: default_trials(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    /// Rejects combinations that cannot mean anything.
    pub fn check(&self) -> Result<(), HarnessError> {
        if self.d == 0 {
            return Err(HarnessError::Config("code distance must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.model == Model::LatticeSurgery && self.cuts != CutKind::Ecmas {
            return Err(HarnessError::Config("cut initialisation only applies to double-defect chips".into()));
        }
        Ok(())
    }
}

/// Chip numbers recorded in a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChipStats {
    pub m1: usize,
    pub m2: usize,
    pub rows: usize,
    pub cols: usize,
    pub bandwidth: usize,
    pub total_bandwidth: usize,
    pub capacity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub circuit: String,
    pub n: usize,
    pub alpha: usize,
    pub g: usize,
    pub pm: usize,
    pub model: String,
    pub chip_config: String,
    pub d: usize,
    pub chip: ChipStats,
    pub scheduler: String,
    /// Which scheduler actually ran (`resu` or `limited` for `ecmas`).
    pub scheduler_used: String,
    pub mapping: String,
    pub cuts: String,
    pub seed: u64,
    pub delta: usize,
    pub modifications: usize,
    pub compile_ms: f64,
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub schedule: EncodedSchedule,
    pub export: ScheduleDoc,
    pub layout: ChipLayout,
    pub mapping: TileMapping,
    pub initial_cuts: Vec<Cut>,
}

/// Chip, placement and cut initialisation for one circuit.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub layout: ChipLayout,
    pub mapping: TileMapping,
    /// Empty for lattice surgery.
    pub cuts: Vec<Cut>,
    pub alpha: usize,
    pub pm: usize,
}

struct Compiled {
    prepared: Prepared,
    graph: RoutingGraph,
    schedule: EncodedSchedule,
    used: &'static str,
}

/// Chip layout for `n` qubits under `config`. Slack stays unassigned when it
/// will be handed out by bandwidth adjusting.
pub fn build_layout(config: &RunConfig, n: usize, pm: usize, adjusting: bool) -> Result<ChipLayout, HarnessError> {
    let (model, d) = (config.model, config.d);
    let free = determine_shape(n, n.max(1), n.max(1))?;
    if let ChipConfig::Bandwidth { lanes } = config.chip {
        return Ok(ChipLayout::uniform(model, d, free.rows, free.cols, lanes));
    }
    let (m1, m2) = config_dims(config.chip, n, d, model, Some(pm), (free.rows, free.cols))?;
    let spec = ChipSpec { model, m1, m2, d };
    let (max_rows, max_cols) = spec.max_grid();
    let shape = determine_shape(n, max_rows, max_cols)?;
    let policy = if adjusting { SlackPolicy::Unassigned } else { SlackPolicy::Uniform };
    Ok(ChipLayout::derive(spec, shape.rows, shape.cols, policy)?)
}

/// Lays out the chip, places the qubits and picks initial cuts.
pub fn prepare(config: &RunConfig, circuit: &LogicalCircuit) -> Result<Prepared, HarnessError> {
    let dag = GateDag::build(circuit);
    prepare_with(config, circuit, &dag, para_finding(&dag).pm())
}

fn prepare_with(config: &RunConfig, circuit: &LogicalCircuit, dag: &GateDag, pm: usize) -> Result<Prepared, HarnessError> {
    let n = circuit.n();
    let comm = CommGraph::build(circuit);
    // Adjusting targets limited chips; a sufficient chip is sized for even lanes.
    let adjusting = config.mapping == MappingKind::Ecmas
        && !matches!(config.chip, ChipConfig::Sufficient | ChipConfig::Bandwidth { .. });
    let base = build_layout(config, n, pm, adjusting)?;
    let shape = ArrayShape { rows: base.rows(), cols: base.cols() };
    let mut mapping = match config.mapping {
        MappingKind::Ecmas if !circuit.is_empty() => establish_mapping(&comm, shape, config.trials, config.seed)?,
        MappingKind::Ecmas | MappingKind::Snake => snake_mapping(n, shape),
        MappingKind::Random => random_mapping(n, shape, config.seed),
    };
    let layout = if adjusting { adjust_bandwidth(&base, &mapping, circuit) } else { base };
    if config.mapping == MappingKind::Ecmas && unroutable_edges(&layout, &mapping, &comm) > 0 {
        // Swap search can stall; a snake start is the other seed for it.
        let score = |m: &TileMapping| (unroutable_edges(&layout, m, &comm), mapping_cost(m, &comm).unwrap_or(u64::MAX));
        mapping = [mapping, snake_mapping(n, shape)]
            .iter()
            .map(|m| repair_routability(&layout, m, &comm))
            .min_by_key(score)
            .unwrap();
    }
    let cuts = match (config.model, config.cuts) {
        (Model::LatticeSurgery, _) => Vec::new(),
        (Model::DoubleDefect, CutKind::Ecmas) => init_cut_types(circuit, dag),
        (Model::DoubleDefect, CutKind::Random) => random_cuts(n, config.seed),
        (Model::DoubleDefect, CutKind::MaxCut) => max_cut_cuts(&comm, config.seed),
    };
    Ok(Prepared { layout, mapping, cuts, alpha: dag.alpha(), pm })
}

fn compile(config: &RunConfig, circuit: &LogicalCircuit) -> Result<Compiled, HarnessError> {
    let dag = GateDag::build(circuit);
    let layers = para_finding(&dag);
    let p = prepare_with(config, circuit, &dag, layers.pm())?;
    let graph = RoutingGraph::build(&p.layout, &p.mapping);
    let sufficient = p.pm == 0 || p.layout.capacity().is_some_and(|c| c >= p.pm);
    let limited = |order, same_cut| {
        schedule_limited(circuit, &dag, &graph, &p.layout, &p.mapping, &p.cuts, LimitedOptions { order, same_cut })
    };
    let resu = || schedule_sufficient(circuit, &layers, &graph, &p.layout, &p.mapping);
    let (schedule, used) = match config.scheduler {
        SchedulerKind::Ecmas if sufficient => (resu()?, "resu"),
        SchedulerKind::Resu => (resu()?, "resu"),
        SchedulerKind::Ecmas | SchedulerKind::Limited => (limited(GateOrder::Priority, SameCutPolicy::MValue)?, "limited"),
        SchedulerKind::CircuitOrder => (limited(GateOrder::Program, SameCutPolicy::MValue)?, "circuit-order"),
        SchedulerKind::TimeFirst => (limited(GateOrder::Priority, SameCutPolicy::TimeFirst)?, "time-first"),
        SchedulerKind::ChannelFirst => (limited(GateOrder::Priority, SameCutPolicy::ChannelFirst)?, "channel-first"),
    };
    Ok(Compiled { prepared: p, graph, schedule, used })
}

/// Layout summary with per-channel bandwidths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutSummary {
    pub model: String,
    pub d: usize,
    pub m1: usize,
    pub m2: usize,
    pub rows: usize,
    pub cols: usize,
    /// Horizontal channels, top to bottom.
    pub row_channels: Vec<usize>,
    /// Vertical channels, left to right.
    pub col_channels: Vec<usize>,
    pub bandwidth: usize,
    pub total_bandwidth: usize,
    pub capacity: Option<usize>,
}

pub fn describe_layout(layout: &ChipLayout) -> LayoutSummary {
    let spec = layout.spec();
    LayoutSummary {
        model: spec.model.to_string(),
        d: spec.d,
        m1: spec.m1,
        m2: spec.m2,
        rows: layout.rows(),
        cols: layout.cols(),
        row_channels: layout.bandwidths(Axis::Horizontal),
        col_channels: layout.bandwidths(Axis::Vertical),
        bandwidth: layout.bandwidth(),
        total_bandwidth: layout.total_bandwidth(),
        capacity: layout.capacity(),
    }
}

/// Tile and initial cut of every qubit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub qubit: usize,
    pub row: usize,
    pub col: usize,
    pub cut: Option<Cut>,
}

pub fn describe_mapping(mapping: &TileMapping, cuts: &[Cut]) -> Vec<MappingEntry> {
    mapping
        .tiles()
        .iter()
        .enumerate()
        .map(|(q, &(row, col))| MappingEntry { qubit: q, row, col, cut: cuts.get(q).copied() })
        .collect()
}

/// Runs the whole pipeline on one configuration.
pub fn run(config: &RunConfig) -> Result<RunOutput, HarnessError> {
    config.check()?;
    let circuit = config.circuit.load(config.seed)?;
    run_circuit(config, &circuit)
}

/// Like [`run`], with the circuit already loaded.
pub fn run_circuit(config: &RunConfig, circuit: &LogicalCircuit) -> Result<RunOutput, HarnessError> {
    let start = Instant::now();
    let c = compile(config, circuit)?;
    let compile_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut violations: Vec<String> = match validate(&c.schedule, circuit, &c.graph, &c.prepared.mapping) {
        Ok(()) => Vec::new(),
        Err(v) => v.iter().map(ToString::to_string).collect(),
    };
    if c.schedule.delta() < c.prepared.alpha {
        violations.push(format!("{} cycles is below the critical path {}", c.schedule.delta(), c.prepared.alpha));
    }
    let report = RunReport {
        circuit: config.circuit.label(),
        n: circuit.n(),
        alpha: c.prepared.alpha,
        g: circuit.len(),
        pm: c.prepared.pm,
        model: config.model.to_string(),
        chip_config: config.chip.to_string(),
        d: config.d,
        chip: ChipStats {
            m1: c.prepared.layout.spec().m1,
            m2: c.prepared.layout.spec().m2,
            rows: c.prepared.layout.rows(),
            cols: c.prepared.layout.cols(),
            bandwidth: c.prepared.layout.bandwidth(),
            total_bandwidth: c.prepared.layout.total_bandwidth(),
            capacity: c.prepared.layout.capacity(),
        },
        scheduler: config.scheduler.to_string(),
        scheduler_used: c.used.to_string(),
        mapping: config.mapping.to_string(),
        cuts: if config.model == Model::DoubleDefect { config.cuts.to_string() } else { "-".into() },
        seed: config.seed,
        delta: c.schedule.delta(),
        modifications: c.schedule.modifications(),
        compile_ms,
        valid: violations.is_empty(),
        violations,
    };
    Ok(RunOutput {
        export: c.schedule.export(&c.graph),
        initial_cuts: c.schedule.initial_cuts.clone(),
        report,
        schedule: c.schedule,
        layout: c.prepared.layout,
        mapping: c.prepared.mapping,
    })
}

/// `(delta_a - delta_b) / delta_a` as a percentage; 0 when both are 0.
pub fn reduction(delta_a: usize, delta_b: usize) -> f64 {
    if delta_a == 0 {
        return 0.0;
    }
    (delta_a as f64 - delta_b as f64) / delta_a as f64 * 100.0
}

/// Cycle reduction of `b` over `a`. Both reports must describe the same
/// circuit on the same chip.
pub fn compare(a: &RunReport, b: &RunReport) -> Result<f64, HarnessError> {
    let same_circuit = a.circuit == b.circuit && a.n == b.n && a.g == b.g && a.alpha == b.alpha;
    if !same_circuit {
        return Err(HarnessError::Mismatch(format!("different circuits: {} vs {}", a.circuit, b.circuit)));
    }
    if a.model != b.model || (a.chip.m1, a.chip.m2, a.d) != (b.chip.m1, b.chip.m2, b.d) {
        return Err(HarnessError::Mismatch(format!(
            "different chips: {} {}x{} d={} vs {} {}x{} d={}",
            a.model, a.chip.m1, a.chip.m2, a.d, b.model, b.chip.m1, b.chip.m2, b.d
        )));
    }
    Ok(reduction(a.delta, b.delta))
}

/// One CSV row of a sweep. Failed runs keep only the config columns and the
/// error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub circuit: String,
    pub seed: u64,
    pub model: String,
    pub chip_config: String,
    pub d: usize,
    pub scheduler: String,
    pub mapping: String,
    pub cuts: String,
    pub scheduler_used: Option<String>,
    pub n: Option<usize>,
    pub alpha: Option<usize>,
    pub g: Option<usize>,
    pub pm: Option<usize>,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub bandwidth: Option<usize>,
    pub capacity: Option<usize>,
    pub delta: Option<usize>,
    pub compile_ms: Option<f64>,
    pub time_ratio: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn key_without_chip(&self) -> (String, u64, String, usize, String, String, String) {
        (
            self.circuit.clone(),
            self.seed,
            self.model.clone(),
            self.d,
            self.scheduler.clone(),
            self.mapping.clone(),
            self.cuts.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    /// Compile-time samples per row; the median is reported.
    pub timing_runs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { workers: None, timing_runs: 3 }
    }
}

fn sweep_row(config: &RunConfig, timing_runs: usize) -> SweepRow {
    let mut row = SweepRow {
        circuit: config.circuit.label(),
        seed: config.seed,
        model: config.model.to_string(),
        chip_config: config.chip.to_string(),
        d: config.d,
        scheduler: config.scheduler.to_string(),
        mapping: config.mapping.to_string(),
        cuts: if config.model == Model::DoubleDefect { config.cuts.to_string() } else { "-".into() },
        scheduler_used: None,
        n: None,
        alpha: None,
        g: None,
        pm: None,
        m1: None,
        m2: None,
        rows: None,
        cols: None,
        bandwidth: None,
        capacity: None,
        delta: None,
        compile_ms: None,
        time_ratio: None,
        error: None,
    };
    let circuit = match config.check().and_then(|()| config.circuit.load(config.seed)) {
        Ok(c) => c,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let mut times = Vec::with_capacity(timing_runs.max(1));
    let mut first: Option<RunReport> = None;
    for _ in 0..timing_runs.max(1) {
        match run_circuit(config, &circuit) {
            Ok(out) => {
                times.push(out.report.compile_ms);
                first.get_or_insert(out.report);
            }
            Err(e) => {
                row.error = Some(e.to_string());
                return row;
            }
        }
    }
    let r = first.unwrap();
    if !r.valid {
        row.error = Some(format!("validation failed: {}", r.violations.join("; ")));
        return row;
    }
    times.sort_by(f64::total_cmp);
    row.scheduler_used = Some(r.scheduler_used);
    row.n = Some(r.n);
    row.alpha = Some(r.alpha);
    row.g = Some(r.g);
    row.pm = Some(r.pm);
    row.m1 = Some(r.chip.m1);
    row.m2 = Some(r.chip.m2);
    row.rows = Some(r.chip.rows);
    row.cols = Some(r.chip.cols);
    row.bandwidth = Some(r.chip.bandwidth);
    row.capacity = r.chip.capacity;
    row.delta = Some(r.delta);
    row.compile_ms = Some(times[times.len() / 2]);
    row
}

/// Runs every config (rows in input order). Failures are recorded per row.
/// Each row's time ratio is its compile time over that of the matching run on
/// the minimum viable chip, when the sweep contains one.
pub fn sweep(configs: &[RunConfig], options: SweepOptions) -> Result<Vec<SweepRow>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut rows: Vec<SweepRow> = pool.install(|| configs.par_iter().map(|c| sweep_row(c, options.timing_runs)).collect());
    let reference: Vec<Option<f64>> = rows
        .iter()
        .map(|r| {
            rows.iter()
                .find(|m| m.chip_config == ChipConfig::MinimumViable.to_string() && m.key_without_chip() == r.key_without_chip())
                .and_then(|m| m.compile_ms)
        })
        .collect();
    for (row, base) in rows.iter_mut().zip(reference) {
        if let (Some(t), Some(b)) = (row.compile_ms, base) {
            row.time_ratio = Some(if b > 0.0 { t / b } else { 1.0 });
        }
    }
    Ok(rows)
}

pub fn write_csv<W: std::io::Write, T: Serialize>(rows: &[T], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean results of rows that differ only in seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub circuit: String,
    pub model: String,
    pub chip_config: String,
    pub scheduler: String,
    pub mapping: String,
    pub cuts: String,
    pub runs: usize,
    pub failures: usize,
    pub mean_delta: Option<f64>,
    pub mean_time_ratio: Option<f64>,
}

pub fn summarize(rows: &[SweepRow]) -> Vec<GroupSummary> {
    let mut groups: Vec<GroupSummary> = Vec::new();
    let mut sums: Vec<(f64, usize, f64, usize)> = Vec::new();
    for r in rows {
        let idx = groups.iter().position(|g| {
            g.circuit == r.circuit
                && g.model == r.model
                && g.chip_config == r.chip_config
                && g.scheduler == r.scheduler
                && g.mapping == r.mapping
                && g.cuts == r.cuts
        });
        let idx = idx.unwrap_or_else(|| {
            groups.push(GroupSummary {
                circuit: r.circuit.clone(),
                model: r.model.clone(),
                chip_config: r.chip_config.clone(),
                scheduler: r.scheduler.clone(),
                mapping: r.mapping.clone(),
                cuts: r.cuts.clone(),
                runs: 0,
                failures: 0,
                mean_delta: None,
                mean_time_ratio: None,
            });
            sums.push((0.0, 0, 0.0, 0));
            groups.len() - 1
        });
        groups[idx].runs += 1;
        match r.delta {
            Some(d) => {
                sums[idx].0 += d as f64;
                sums[idx].1 += 1;
            }
            None => groups[idx].failures += 1,
        }
        if let Some(t) = r.time_ratio {
            sums[idx].2 += t;
            sums[idx].3 += 1;
        }
    }
    for (g, (ds, dn, ts, tn)) in groups.iter_mut().zip(sums) {
        g.mean_delta = (dn > 0).then(|| ds / dn as f64);
        g.mean_time_ratio = (tn > 0).then(|| ts / tn as f64);
    }
    groups
}

/// Cross product of config variations around a base config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub base: RunConfig,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub chips: Vec<String>,
    #[serde(default)]
    pub schedulers: Vec<SchedulerKind>,
    #[serde(default)]
    pub mappings: Vec<MappingKind>,
    #[serde(default)]
    pub cuts: Vec<CutKind>,
    /// Overrides the parallelism of a random-circuit generator.
    #[serde(default)]
    pub parallelism: Vec<usize>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepPlan {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn expand(&self) -> Result<Vec<RunConfig>, HarnessError> {
        fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
            if values.is_empty() {
                vec![base]
            } else {
                values.to_vec()
            }
        }
        let models: Vec<Model> =
            self.models.iter().map(|s| s.parse().map_err(HarnessError::Config)).collect::<Result<_, _>>()?;
        let chips: Vec<ChipConfig> =
            self.chips.iter().map(|s| s.parse().map_err(HarnessError::Config)).collect::<Result<_, _>>()?;
        let circuits: Vec<CircuitSource> = match (&self.base.circuit, self.parallelism.is_empty()) {
            (CircuitSource::Generated(GeneratorSpec::Random { n, depth, seed, .. }), false) => self
                .parallelism
                .iter()
                .map(|&p| CircuitSource::Generated(GeneratorSpec::Random { n: *n, depth: *depth, parallelism: p, seed: *seed }))
                .collect(),
            (_, false) => return Err(HarnessError::Config("parallelism needs a random-circuit generator".into())),
            (c, true) => vec![c.clone()],
        };
        let mut out = Vec::new();
        for circuit in &circuits {
            for &model in &axis(&models, self.base.model) {
                for &chip in &axis(&chips, self.base.chip) {
                    for &scheduler in &axis(&self.schedulers, self.base.scheduler) {
                        for &mapping in &axis(&self.mappings, self.base.mapping) {
                            let cut_axis =
                                if model == Model::LatticeSurgery { vec![CutKind::Ecmas] } else { axis(&self.cuts, self.base.cuts) };
                            for &cuts in &cut_axis {
                                for &seed in &axis(&self.seeds, self.base.seed) {
                                    let c = RunConfig {
                                        circuit: circuit.clone(),
                                        model,
                                        chip,
                                        scheduler,
                                        mapping,
                                        cuts,
                                        seed,
                                        ..self.base.clone()
                                    };
                                    c.check()?;
                                    out.push(c);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
