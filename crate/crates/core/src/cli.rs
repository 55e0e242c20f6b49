//! The `topomap` command line.
//!
//! Exit codes: 0 success, 2 input error, 3 validation error, 4 calibration
//! residual above threshold. `TOPOMAP_SEED` overrides the seed of scenario
//! and grid files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gateway::transition_table_json;
use crate::graph::{self, CommMapping, Domain, GraphError, TopicImpl};
use crate::mapping::{map_communication, MappingError, MappingReport, Policy};
use crate::sim::{
    calibrate, compute_stats, grid_cells, simulate, CalibrationOptions, GridCell, PlatformModel, Scenario,
    ScenarioFile, SimError, TargetSet, TransferStats, GRID_HW_SUBSCRIBERS, GRID_SIZES,
};

pub const SEED_ENV: &str = "TOPOMAP_SEED";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "topomap",
    version,
    about = "Topology-aware communication mapping for CPU+FPGA SoCs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map every topic of a graph to SMT, HMT or a gateway.
    Map {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        policy: Policy,
        /// Platform model supplying the cost parameters (bundled model if omitted).
        #[arg(long)]
        platform: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a scenario and export its trace and delivery statistics.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        platform: Option<PathBuf>,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        stats: PathBuf,
    },
    /// Simulate a scenario or grid under two policies and tabulate speedups.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        platform: Option<PathBuf>,
        /// Baseline and candidate, e.g. `smt,multi-hw-sub`.
        #[arg(long)]
        policies: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the platform model to measured speedups.
    Calibrate {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Starting point of the search (bundled initial guess if omitted).
        #[arg(long)]
        platform: Option<PathBuf>,
    },
    /// Export the gateway state machine's transition table.
    FsmExport {
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a grid comparison into one plot-ready CSV per publisher/path pair.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse::<Policy>()
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Validation(String),
    Calibration(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Calibration(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Calibration(m) => write!(f, "calibration error: {m}"),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Syntax { .. } => CliError::Input(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MappingError> for CliError {
    fn from(e: MappingError) -> Self {
        match e {
            MappingError::Graph(g) => g.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Graph(g) => g.into(),
            SimError::Mapping(m) => m.into(),
            SimError::NoTargets => CliError::Input(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Parses `args` (including the program name), runs the command and maps
/// the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("topomap: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Map {
            graph,
            policy,
            platform,
            out,
        } => cmd_map(&graph, policy, platform.as_deref(), &out),
        Command::Simulate {
            scenario,
            platform,
            trace,
            stats,
        } => cmd_simulate(&scenario, platform.as_deref(), &trace, &stats),
        Command::Compare {
            scenario,
            platform,
            policies,
            out,
        } => cmd_compare(&scenario, platform.as_deref(), &policies, &out),
        Command::Calibrate { targets, out, platform } => cmd_calibrate(&targets, platform.as_deref(), &out),
        Command::FsmExport { out } => write(&out, transition_table_json().as_bytes()),
        Command::Report { input, out_dir } => cmd_report(&input, &out_dir),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

/// Seed from `TOPOMAP_SEED`, else `fallback`.
pub fn seed_override(fallback: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(fallback),
    }
}

fn load_platform(path: Option<&Path>) -> Result<PlatformModel, CliError> {
    let Some(path) = path else {
        return Ok(PlatformModel::default());
    };
    let model: PlatformModel =
        serde_json::from_str(&read(path)?).map_err(|e| CliError::Input(format!("platform {}: {e}", path.display())))?;
    model.validate()?;
    Ok(model)
}

fn cmd_map(graph_path: &Path, policy: Policy, platform: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let doc = graph::parse_document(&read(graph_path)?)?;
    let nm = doc
        .node_mapping
        .ok_or_else(|| CliError::Input(format!("{}: missing node_mapping", graph_path.display())))?;
    let params = load_platform(platform)?.to_cost_params();
    let report = MappingReport::build(&doc.graph, &nm, &params, policy)?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write(out, json.as_bytes())?;
    print!("{}", report.to_table());
    Ok(())
}

fn load_scenario_file(path: &Path) -> Result<ScenarioFile, CliError> {
    let file = ScenarioFile::parse(&read(path)?)?;
    Ok(file)
}

fn cmd_simulate(scenario: &Path, platform: Option<&Path>, trace_out: &Path, stats_out: &Path) -> Result<(), CliError> {
    let file = load_scenario_file(scenario)?;
    let dir = base_dir(scenario);
    let doc = file.load_graph(dir)?;
    if file.node_mapping.is_none() && doc.node_mapping.is_none() {
        return Err(CliError::Input(format!("{}: missing node_mapping", scenario.display())));
    }
    if file.comm_mapping.is_none() {
        return Err(CliError::Input(format!("{}: missing comm_mapping", scenario.display())));
    }
    let mut sc = file.resolve(dir, None)?;
    sc.seed = seed_override(sc.seed)?;
    let platform = load_platform(platform)?;
    let trace = simulate(&sc, &platform)?;
    let stats = compute_stats(&trace)?;

    let mut buf = Vec::new();
    trace.write_csv(&mut buf).expect("in-memory csv");
    write(trace_out, &buf)?;
    let mut buf = Vec::new();
    stats.write_csv(&mut buf).expect("in-memory csv");
    write(stats_out, &buf)?;
    println!(
        "{} messages, {} deliveries, {} MEMIF transfers",
        trace.messages.len(),
        trace.events.iter().filter(|e| e.is_delivery()).count(),
        trace.count(crate::sim::TraceKind::MemifXferStart)
    );
    Ok(())
}

fn default_messages() -> u32 {
    500
}

fn default_publishers() -> Vec<Domain> {
    vec![Domain::Hardware, Domain::Software]
}

fn default_sizes() -> Vec<u64> {
    GRID_SIZES.to_vec()
}

fn default_hw_subscribers() -> Vec<usize> {
    GRID_HW_SUBSCRIBERS.to_vec()
}

/// The single-topic experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_publishers")]
    pub publishers: Vec<Domain>,
    #[serde(default = "default_sizes")]
    pub sizes_bytes: Vec<u64>,
    #[serde(default = "default_hw_subscribers")]
    pub hw_subscribers: Vec<usize>,
    /// Messages per cell.
    #[serde(default = "default_messages")]
    pub messages: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub grid: GridSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl GridSpec {
    pub fn cells(&self) -> Vec<GridCell> {
        grid_cells(&self.sizes_bytes, &self.hw_subscribers)
            .into_iter()
            .filter(|c| self.publishers.contains(&c.publisher))
            .collect()
    }
}

/// One row of a grid comparison: policy `a` is the baseline, `b` the candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub publisher: Domain,
    pub hw_subscribers: usize,
    pub size_bytes: u64,
    pub a_hw_us: f64,
    pub b_hw_us: f64,
    pub speedup_hw: f64,
    pub a_sw_us: f64,
    pub b_sw_us: f64,
    pub speedup_sw: f64,
}

fn parse_policy_pair(s: &str) -> Result<(Policy, Policy), CliError> {
    let parts: Vec<_> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((a.parse().map_err(CliError::Input)?, b.parse().map_err(CliError::Input)?)),
        _ => Err(CliError::Input(format!(
            "--policies needs exactly two policies, got `{s}`"
        ))),
    }
}

fn transfer_times(sc: &Scenario, platform: &PlatformModel) -> Result<TransferStats, CliError> {
    let trace = simulate(sc, platform)?;
    Ok(compute_stats(&trace)?)
}

fn with_policy(mut sc: Scenario, platform: &PlatformModel, policy: Policy) -> Result<Scenario, CliError> {
    let (cm, _) = map_communication(&sc.graph, &sc.node_mapping, &platform.to_cost_params(), policy)?;
    sc.comm_mapping = cm;
    Ok(sc)
}

/// Runs every cell of `spec` under both policies. Cells run in parallel;
/// rows come back in grid order.
pub fn compare_grid(
    spec: &GridSpec,
    seed: u64,
    platform: &PlatformModel,
    policies: (Policy, Policy),
) -> Result<Vec<GridRow>, CliError> {
    spec.cells()
        .par_iter()
        .map(|cell| {
            let base = cell.scenario(TopicImpl::Software, spec.messages, seed);
            let a = transfer_times(&with_policy(base.clone(), platform, policies.0)?, platform)?;
            let b = transfer_times(&with_policy(base, platform, policies.1)?, platform)?;
            let (a, b) = (&a.topics[&"A".into()], &b.topics[&"A".into()]);
            let get = |v: Option<f64>| v.ok_or_else(|| CliError::Validation("grid cell without deliveries".into()));
            let (a_hw, b_hw, a_sw, b_sw) = (
                get(a.t_trans_hw_us)?,
                get(b.t_trans_hw_us)?,
                get(a.t_trans_sw_us)?,
                get(b.t_trans_sw_us)?,
            );
            Ok(GridRow {
                publisher: cell.publisher,
                hw_subscribers: cell.hw_subscribers,
                size_bytes: cell.size_bytes,
                a_hw_us: a_hw,
                b_hw_us: b_hw,
                speedup_hw: a_hw / b_hw,
                a_sw_us: a_sw,
                b_sw_us: b_sw,
                speedup_sw: a_sw / b_sw,
            })
        })
        .collect()
}

pub fn grid_rows_csv(rows: &[GridRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "publisher",
        "hw_subscribers",
        "size_bytes",
        "a_hw_us",
        "b_hw_us",
        "speedup_hw",
        "a_sw_us",
        "b_sw_us",
        "speedup_sw",
    ])
    .expect("in-memory csv");
    for r in rows {
        w.write_record([
            r.publisher.to_string(),
            r.hw_subscribers.to_string(),
            r.size_bytes.to_string(),
            format!("{:.3}", r.a_hw_us),
            format!("{:.3}", r.b_hw_us),
            format!("{:.6}", r.speedup_hw),
            format!("{:.3}", r.a_sw_us),
            format!("{:.3}", r.b_sw_us),
            format!("{:.6}", r.speedup_sw),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

fn cmd_compare(scenario: &Path, platform: Option<&Path>, policies: &str, out: &Path) -> Result<(), CliError> {
    let policies = parse_policy_pair(policies)?;
    let platform = load_platform(platform)?;
    let text = read(scenario)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::from(graph_syntax(&e)))?;

    let csv = if value.get("grid").is_some() {
        let file: GridFile = serde_json::from_value(value).map_err(|e| CliError::Input(e.to_string()))?;
        if file.grid.cells().is_empty() || file.grid.messages == 0 {
            return Err(CliError::Validation("grid has no cells or no messages".into()));
        }
        if file.grid.hw_subscribers.contains(&0) || file.grid.sizes_bytes.contains(&0) {
            return Err(CliError::Validation(
                "grid sizes and subscriber counts must be positive".into(),
            ));
        }
        let rows = compare_grid(&file.grid, seed_override(file.seed)?, &platform, policies)?;
        grid_rows_csv(&rows)
    } else {
        let file = ScenarioFile::parse(&text)?;
        let dir = base_dir(scenario);
        let doc = file.load_graph(dir)?;
        if file.node_mapping.is_none() && doc.node_mapping.is_none() {
            return Err(CliError::Input(format!("{}: missing node_mapping", scenario.display())));
        }
        // The policies decide the mapping; any total mapping gets the scenario through validation.
        let placeholder = CommMapping::uniform(&doc.graph, TopicImpl::Software);
        let mut base = file.resolve(dir, Some(placeholder))?;
        base.seed = seed_override(base.seed)?;
        let a = transfer_times(&with_policy(base.clone(), &platform, policies.0)?, &platform)?;
        let b = transfer_times(&with_policy(base, &platform, policies.1)?, &platform)?;
        if a.topics.keys().ne(b.topics.keys()) {
            return Err(CliError::Validation("the two runs cover different topics".into()));
        }
        scenario_compare_csv(&a, &b)
    };
    write(out, csv.as_bytes())
}

fn graph_syntax(e: &serde_json::Error) -> GraphError {
    GraphError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn scenario_compare_csv(a: &TransferStats, b: &TransferStats) -> String {
    let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "topic",
        "a_hw_us",
        "b_hw_us",
        "speedup_hw",
        "a_sw_us",
        "b_sw_us",
        "speedup_sw",
    ])
    .expect("in-memory csv");
    for s in TransferStats::speedups(a, b) {
        let (ta, tb) = (&a.topics[&s.topic], &b.topics[&s.topic]);
        w.write_record([
            s.topic.to_string(),
            opt(ta.t_trans_hw_us, 3),
            opt(tb.t_trans_hw_us, 3),
            opt(s.speedup_hw, 6),
            opt(ta.t_trans_sw_us, 3),
            opt(tb.t_trans_sw_us, 3),
            opt(s.speedup_sw, 6),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

fn cmd_calibrate(targets: &Path, initial: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let set = TargetSet::from_json(&read(targets)?).map_err(|e| CliError::Input(e.to_string()))?;
    let initial = match initial {
        Some(p) => load_platform(Some(p))?,
        None => PlatformModel::from_json(include_str!("../data/platform_initial.json"))?,
    };
    let report = calibrate(&initial, &set, &CalibrationOptions::default())?;
    let mut json = report.platform.to_json();
    json.push('\n');
    write(out, json.as_bytes())?;
    for r in &report.residuals {
        let t = &r.target;
        println!(
            "{}->{} k={} size={}: target {:.3} simulated {:.3} rel_error {:.4}",
            t.publisher, t.path, t.hw_subscribers, t.size_bytes, t.speedup, r.simulated, r.rel_error
        );
    }
    println!(
        "max rel_error {:.4} (threshold {:.4}), {} evaluations",
        report.max_rel_error, report.threshold, report.evaluations
    );
    if !report.attained {
        return Err(CliError::Calibration(format!(
            "max relative error {:.4} exceeds {:.4}",
            report.max_rel_error, report.threshold
        )));
    }
    Ok(())
}

/// Output file of each publisher/path series.
pub const REPORT_SERIES: [(&str, Domain, Domain); 4] = [
    ("hw_to_hw.csv", Domain::Hardware, Domain::Hardware),
    ("hw_to_sw.csv", Domain::Hardware, Domain::Software),
    ("sw_to_hw.csv", Domain::Software, Domain::Hardware),
    ("sw_to_sw.csv", Domain::Software, Domain::Software),
];

/// `size_bytes` plus one speedup column per subscriber count.
pub fn report_series(rows: &[GridRow], publisher: Domain, path: Domain) -> String {
    let ks: std::collections::BTreeSet<usize> = rows.iter().map(|r| r.hw_subscribers).collect();
    let mut by_size: BTreeMap<u64, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.publisher == publisher) {
        let v = if path == Domain::Hardware {
            r.speedup_hw
        } else {
            r.speedup_sw
        };
        by_size.entry(r.size_bytes).or_default().insert(r.hw_subscribers, v);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = std::iter::once("size_bytes".to_string())
        .chain(ks.iter().map(|k| format!("hw_subscribers_{k}")))
        .collect();
    w.write_record(&header).expect("in-memory csv");
    for (size, vals) in by_size {
        let row: Vec<String> = std::iter::once(size.to_string())
            .chain(
                ks.iter()
                    .map(|k| vals.get(k).map(|v| format!("{v:.6}")).unwrap_or_default()),
            )
            .collect();
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

fn cmd_report(input: &Path, out_dir: &Path) -> Result<(), CliError> {
    let text = read(input)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<GridRow> = rdr
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(format!("{}: not a grid comparison: {e}", input.display())))?;
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no grid comparison rows", input.display())));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", out_dir.display())))?;
    for (name, publisher, path) in REPORT_SERIES {
        write(&out_dir.join(name), report_series(&rows, publisher, path).as_bytes())?;
    }
    Ok(())
}
