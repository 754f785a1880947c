//! Command line front end: `partition`, `centrality`, `generate` and `bench`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::benchgen::{generate_gn, run_trials, sample_benchmarks, BenchSpec, GnParams, SeedCount};
use crate::centrality::{coreness, edge_betweenness};
use crate::error::{Error, Result};
use crate::io::{labels_csv, load_graph, load_labels, load_seeds, report_json, EdgeFormat};
use crate::region_force::Origin;
use crate::tsos::{run_tsos, AffinitySource, Delta, StageReport, StatsPopulation, TsosConfig};

#[derive(Debug, Parser)]
#[command(
    name = "seedpart",
    version,
    about = "Seeded community partition of networks"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Partition a network from benchmark (seed) nodes.
    Partition(Box<PartitionArgs>),
    /// Dump edge betweenness, affinity and coreness.
    Centrality(CentralityArgs),
    /// Generate a synthetic network.
    #[command(subcommand)]
    Generate(GenerateKind),
    /// Run a repeated-trial experiment described by a TOML file.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    /// Edge list (`i j`, or `i j w` with --weighted).
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    weighted: bool,
    /// betweenness | given
    #[arg(long)]
    affinity: Option<String>,
    /// Ground truth labels; enables accuracy reporting and seed sampling.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Seed file with `node label` lines.
    #[arg(long, conflicts_with_all = ["seed_fraction", "seed_count"])]
    seeds: Option<PathBuf>,
    /// Sample this fraction of nodes from the ground truth as seeds.
    #[arg(long, conflicts_with = "seed_count")]
    seed_fraction: Option<f64>,
    /// Sample this many seeds from the ground truth.
    #[arg(long)]
    seed_count: Option<usize>,
    #[arg(long)]
    per_class_min: Option<usize>,
    #[arg(long)]
    stages: Option<usize>,
    /// auto | non-negative number
    #[arg(long)]
    delta: Option<String>,
    /// Nodes entering the confidence statistics: all_free | labelled
    #[arg(long)]
    population: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    /// Augmentation penalty.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Largest equality residual accepted at convergence.
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Maximum promotions per class per stage.
    #[arg(long)]
    cap: Option<usize>,
    /// RNG seed for seed sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Output labels file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-iteration solver trace (CSV).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Final class probabilities (CSV).
    #[arg(long)]
    probabilities: Option<PathBuf>,
    /// Flat `key = value` file; command line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Treat non-convergence as an error.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct CentralityArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    weighted: bool,
    /// Writes `<out>_edges.csv` and `<out>_nodes.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum GenerateKind {
    /// Planted partition with K equal communities.
    Gn(GnArgs),
}

#[derive(Debug, Args)]
struct GnArgs {
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 32)]
    nk: usize,
    /// Expected internal degree; defaults to 16 - zout.
    #[arg(long)]
    zin: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    zout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes `<out>_edges.txt` and `<out>_labels.txt`.
    #[arg(long, default_value = "gn")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Report path; `.csv` selects the per-trial CSV, anything else JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

/// Fully merged settings of a `partition` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub weighted: bool,
    pub affinity: AffinitySource,
    pub labels: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub seed_fraction: Option<f64>,
    pub seed_count: Option<usize>,
    pub per_class_min: usize,
    pub seed: u64,
    pub tsos: TsosConfig,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub probabilities: Option<PathBuf>,
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            graph: None,
            weighted: false,
            affinity: AffinitySource::Betweenness,
            labels: None,
            seeds: None,
            seed_fraction: None,
            seed_count: None,
            per_class_min: 1,
            seed: 0,
            tsos: TsosConfig::default(),
            out: None,
            format: OutputFormat::Csv,
            report: None,
            trace: None,
            probabilities: None,
            strict: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!(
            "invalid boolean '{value}' for '{key}'"
        ))),
    }
}

impl RunConfig {
    /// Sets one key. Keys match the long flag names; `_` and `-` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let solver = &mut self.tsos.solver;
        match key.replace('_', "-").as_str() {
            "graph" => self.graph = Some(value.into()),
            "weighted" => self.weighted = parse_bool(key, value)?,
            "affinity" => self.affinity = value.parse()?,
            "labels" => self.labels = Some(value.into()),
            "seeds" => self.seeds = Some(value.into()),
            "seed-fraction" => self.seed_fraction = Some(parse_value(key, value)?),
            "seed-count" => self.seed_count = Some(parse_value(key, value)?),
            "per-class-min" => self.per_class_min = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "stages" => self.tsos.stages = parse_value(key, value)?,
            "delta" => self.tsos.delta = value.parse()?,
            "population" => self.tsos.population = value.parse()?,
            "cap" => self.tsos.cap = Some(parse_value(key, value)?),
            "eps" => self.tsos.eps = parse_value(key, value)?,
            "tau" => solver.tau = parse_value(key, value)?,
            "c" => solver.penalty = parse_value(key, value)?,
            "step" => solver.step = Some(parse_value(key, value)?),
            "tol" => solver.tol = parse_value(key, value)?,
            "residual-tol" => solver.residual_tol = parse_value(key, value)?,
            "max-iters" => solver.max_iters = parse_value(key, value)?,
            "out" => self.out = Some(value.into()),
            "format" => {
                self.format = OutputFormat::from_str(value, true)
                    .map_err(|_| Error::config(format!("invalid format '{value}'")))?
            }
            "report" => self.report = Some(value.into()),
            "trace" => self.trace = Some(value.into()),
            "probabilities" => self.probabilities = Some(value.into()),
            "strict" => self.strict = parse_bool(key, value)?,
            _ => return Err(Error::config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("config line {}: expected key = value", no + 1))
            })?;
            let value = value.trim().trim_matches('"');
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.graph.is_none() {
            return Err(Error::config("--graph is required"));
        }
        let sampling = self.seed_fraction.is_some() || self.seed_count.is_some();
        match (self.seeds.is_some(), sampling) {
            (true, true) => {
                return Err(Error::config(
                    "give either a seed file or a sampling rule, not both",
                ))
            }
            (false, false) => {
                return Err(Error::config(
                    "give --seeds or --seed-fraction/--seed-count",
                ))
            }
            (false, true) if self.labels.is_none() => {
                return Err(Error::config("seed sampling needs --labels"))
            }
            _ => {}
        }
        if self.seed_fraction.is_some() && self.seed_count.is_some() {
            return Err(Error::config(
                "--seed-fraction and --seed-count are exclusive",
            ));
        }
        self.tsos.validate()
    }
}

fn merge(args: PartitionArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg.apply_file_text(&text)?;
    }
    let solver = &mut cfg.tsos.solver;
    if let Some(v) = args.tau {
        solver.tau = v;
    }
    if let Some(v) = args.c {
        solver.penalty = v;
    }
    if args.step.is_some() {
        solver.step = args.step;
    }
    if let Some(v) = args.tol {
        solver.tol = v;
    }
    if let Some(v) = args.residual_tol {
        solver.residual_tol = v;
    }
    if let Some(v) = args.max_iters {
        solver.max_iters = v;
    }
    if let Some(v) = args.stages {
        cfg.tsos.stages = v;
    }
    if let Some(v) = &args.delta {
        cfg.tsos.delta = v.parse::<Delta>()?;
    }
    if let Some(v) = &args.population {
        cfg.tsos.population = v.parse()?;
    }
    if args.cap.is_some() {
        cfg.tsos.cap = args.cap;
    }
    if let Some(v) = args.eps {
        cfg.tsos.eps = v;
    }
    if let Some(v) = &args.affinity {
        cfg.affinity = v.parse()?;
    }
    // a sampling rule on the command line replaces a seed file from the config and vice versa
    if args.seeds.is_some() {
        cfg.seeds = args.seeds;
        cfg.seed_fraction = None;
        cfg.seed_count = None;
    }
    if args.seed_fraction.is_some() || args.seed_count.is_some() {
        cfg.seeds = None;
        cfg.seed_fraction = args.seed_fraction;
        cfg.seed_count = args.seed_count;
    }
    let paths = [
        (&mut cfg.graph, args.graph),
        (&mut cfg.labels, args.labels),
        (&mut cfg.out, args.out),
        (&mut cfg.report, args.report),
        (&mut cfg.trace, args.trace),
        (&mut cfg.probabilities, args.probabilities),
    ];
    for (slot, value) in paths {
        if value.is_some() {
            *slot = value;
        }
    }
    if let Some(v) = args.per_class_min {
        cfg.per_class_min = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.format {
        cfg.format = v;
    }
    cfg.weighted |= args.weighted;
    cfg.strict |= args.strict;
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn edge_format(weighted: bool) -> EdgeFormat {
    if weighted {
        EdgeFormat::WeightedEdgeList
    } else {
        EdgeFormat::EdgeList
    }
}

#[derive(Serialize)]
struct GraphSummary {
    nodes: usize,
    edges: usize,
    average_degree: f64,
}

#[derive(Serialize)]
struct BenchmarkEntry {
    node: u64,
    class: String,
    origin: Origin,
}

#[derive(Serialize)]
struct SettingsEcho {
    affinity: AffinitySource,
    stages: usize,
    delta: f64,
    population: StatsPopulation,
    tau: f64,
    c: f64,
    step: f64,
    tol: f64,
    residual_tol: f64,
    max_iters: usize,
    eps: f64,
    cap: Option<usize>,
    seed: u64,
}

/// Layout of the `partition` JSON report.
#[derive(Serialize)]
struct PartitionReport {
    graph: GraphSummary,
    classes: Vec<String>,
    settings: SettingsEcho,
    stages: Vec<StageReport>,
    final_accuracy: Option<f64>,
    benchmarks: Vec<BenchmarkEntry>,
}

fn partition(cfg: &RunConfig) -> Result<()> {
    let graph_path = cfg.graph.as_deref().expect("validated");
    let g = load_graph(graph_path, edge_format(cfg.weighted))?;
    let truth = cfg
        .labels
        .as_ref()
        .map(|p| load_labels(p, &g))
        .transpose()?;

    let (seeds, names) = match (&cfg.seeds, &truth) {
        (Some(path), t) => load_seeds(path, &g, t.as_ref().map(|t| t.names.as_slice()))?,
        (None, Some(t)) => {
            let amount = match (cfg.seed_fraction, cfg.seed_count) {
                (Some(f), _) => SeedCount::Fraction(f),
                (None, Some(c)) => SeedCount::Count(c),
                (None, None) => unreachable!("validated"),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let s = sample_benchmarks(
                &t.classes,
                t.class_count(),
                amount,
                cfg.per_class_min,
                &mut rng,
            )?;
            (s, t.names.clone())
        }
        (None, None) => unreachable!("validated"),
    };

    let result = run_tsos(
        &g,
        cfg.affinity,
        &seeds,
        &cfg.tsos,
        truth.as_ref().map(|t| t.classes.as_slice()),
    )?;
    if cfg.strict {
        if let Some(d) = result.diagnostics.iter().find(|d| !d.converged) {
            return Err(Error::NotConverged {
                iters: d.iterations,
            });
        }
    }

    let labels_text = match cfg.format {
        OutputFormat::Csv => labels_csv(&g, &result.labels, &names),
        OutputFormat::Json => {
            let map: serde_json::Map<String, serde_json::Value> = result
                .labels
                .iter()
                .enumerate()
                .map(|(i, &c)| (g.external_id(i).to_string(), names[c].clone().into()))
                .collect();
            serde_json::to_string_pretty(&map)?
        }
    };
    match &cfg.out {
        Some(path) => write_file(path, &labels_text)?,
        None => print!("{labels_text}"),
    }

    if let Some(path) = &cfg.report {
        let step = cfg.tsos.solver.resolve_step(&g).unwrap_or(f64::NAN);
        let solver = &cfg.tsos.solver;
        let mut benchmarks: Vec<BenchmarkEntry> = (0..g.node_count())
            .filter_map(|i| {
                Some(BenchmarkEntry {
                    node: g.external_id(i),
                    class: names[result.benchmarks.class_of(i)?].clone(),
                    origin: result.benchmarks.origin(i)?,
                })
            })
            .collect();
        benchmarks.sort_by_key(|b| b.node);
        let report = PartitionReport {
            graph: GraphSummary {
                nodes: g.node_count(),
                edges: g.edge_count(),
                average_degree: g.average_degree(),
            },
            classes: names.clone(),
            settings: SettingsEcho {
                affinity: cfg.affinity,
                stages: cfg.tsos.stages,
                delta: result.delta,
                population: cfg.tsos.population,
                tau: solver.tau,
                c: solver.penalty,
                step,
                tol: solver.tol,
                residual_tol: solver.residual_tol,
                max_iters: solver.max_iters,
                eps: cfg.tsos.eps,
                cap: cfg.tsos.cap,
                seed: cfg.seed,
            },
            final_accuracy: result.final_accuracy(),
            stages: result.stages.clone(),
            benchmarks,
        };
        write_file(path, &report_json(&report)?)?;
    }

    if let Some(path) = &cfg.trace {
        let mut out = String::from("stage,iter,dual_objective,residual_inf,psi_change\n");
        for (stage, d) in result.diagnostics.iter().enumerate() {
            for line in d.trace_csv().lines().skip(1) {
                let _ = writeln!(out, "{},{line}", stage + 1);
            }
        }
        write_file(path, &out)?;
    }

    if let Some(path) = &cfg.probabilities {
        let mut out = String::from("node");
        for n in &names {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for (i, row) in result.probabilities.iter_rows().enumerate() {
            let _ = write!(out, "{}", g.external_id(i));
            for &v in row {
                let _ = write!(out, ",{}", crate::fmt_sig(v));
            }
            out.push('\n');
        }
        write_file(path, &out)?;
    }
    Ok(())
}

fn centrality(args: &CentralityArgs) -> Result<()> {
    let g = load_graph(&args.graph, edge_format(args.weighted))?;
    let bcl = edge_betweenness(&g);
    let gamma = coreness(&g);
    let mut edges = String::from("u,v,betweenness,affinity\n");
    for (e, b) in g.edges().iter().zip(&bcl) {
        let affinity = if *b > 0.0 {
            crate::fmt_sig(1.0 / b)
        } else {
            String::new()
        };
        let _ = writeln!(
            edges,
            "{},{},{},{affinity}",
            g.external_id(e.tail),
            g.external_id(e.head),
            crate::fmt_sig(*b)
        );
    }
    let mut nodes = String::from("node,degree,coreness\n");
    for (i, k) in gamma.iter().enumerate() {
        let _ = writeln!(nodes, "{},{},{k}", g.external_id(i), g.unweighted_degree(i));
    }
    write_file(&with_suffix(&args.out, "_edges.csv"), &edges)?;
    write_file(&with_suffix(&args.out, "_nodes.csv"), &nodes)
}

fn generate(args: &GnArgs) -> Result<()> {
    let params = GnParams {
        k: args.k,
        nk: args.nk,
        z_in: args.zin.unwrap_or(16.0 - args.zout),
        z_out: args.zout,
        seed: args.seed,
    };
    let (g, labels) = generate_gn(&params)?;
    crate::io::write_edge_list(&g, with_suffix(&args.out, "_edges.txt"))?;
    let mut text = String::new();
    for (i, c) in labels.iter().enumerate() {
        let _ = writeln!(text, "{} {c}", g.external_id(i));
    }
    write_file(&with_suffix(&args.out, "_labels.txt"), &text)
}

fn bench(args: &BenchArgs) -> Result<()> {
    let spec = BenchSpec::load(&args.spec)?;
    let report = run_trials(&spec, args.jobs)?;
    log::info!(
        "{}: mean accuracy {:.2} (+/- {:.2}) over {} trials",
        report.name,
        report.mean,
        report.std,
        report.trials.len()
    );
    let text = match &args.out {
        Some(p) if p.extension().is_some_and(|e| e == "csv") => report.to_csv(),
        _ => report.to_json()?,
    };
    match &args.out {
        Some(path) => write_file(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::config(e.to_string()))?;
    dispatch(cli)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Partition(args) => partition(&merge(*args)?),
        Command::Centrality(args) => centrality(&args),
        Command::Generate(GenerateKind::Gn(args)) => generate(&args),
        Command::Bench(args) => bench(&args),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
