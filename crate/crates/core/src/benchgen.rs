//! Planted-partition (GN) graphs, random benchmark sampling, accuracy and
//! the repeated-trial harness.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::io::{load_graph, load_labels, EdgeFormat};
use crate::region_force::{BenchmarkSets, Origin, DEFAULT_EPS};
use crate::solver::SolverConfig;
use crate::tsos::{
    build_affinity, run_tsos_on_affinity, AffinitySource, Delta, StatsPopulation, TsosConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnParams {
    pub k: usize,
    pub nk: usize,
    pub z_in: f64,
    pub z_out: f64,
    pub seed: u64,
}

impl Default for GnParams {
    fn default() -> Self {
        GnParams {
            k: 4,
            nk: 32,
            z_in: 13.0,
            z_out: 3.0,
            seed: 0,
        }
    }
}

impl GnParams {
    /// External degree used for the "classical" GN row.
    pub const CLASSICAL_Z_OUT: f64 = 2.0;

    /// Parameters with total expected degree 16 split as `16 - z_out`, `z_out`.
    pub fn with_z_out(z_out: f64) -> Self {
        GnParams {
            z_in: 16.0 - z_out,
            z_out,
            ..GnParams::default()
        }
    }

    pub fn node_count(&self) -> usize {
        self.k * self.nk
    }

    /// Link probabilities `(p_in, p_out)`.
    pub fn probabilities(&self) -> Result<(f64, f64)> {
        if self.k == 0 || self.nk == 0 {
            return Err(Error::config(
                "GN needs at least one community and one node",
            ));
        }
        let n = self.node_count();
        let p_in = if self.nk > 1 {
            self.z_in / (self.nk - 1) as f64
        } else {
            0.0
        };
        let p_out = if n > self.nk {
            self.z_out / (n - self.nk) as f64
        } else {
            0.0
        };
        for (name, p) in [("p_in", p_in), ("p_out", p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} = {p} is not a probability")));
            }
        }
        Ok((p_in, p_out))
    }
}

/// GN graph and its community labels, seeded from `p.seed`.
pub fn generate_gn(p: &GnParams) -> Result<(Graph, Vec<usize>)> {
    generate_gn_with(p, &mut ChaCha8Rng::seed_from_u64(p.seed))
}

/// Every pair is linked independently: inside a community with `p_in`,
/// across communities with `p_out`. Node `i` belongs to community `i / nk`.
pub fn generate_gn_with<R: Rng>(p: &GnParams, rng: &mut R) -> Result<(Graph, Vec<usize>)> {
    let (p_in, p_out) = p.probabilities()?;
    let n = p.node_count();
    let labels: Vec<usize> = (0..n).map(|i| i / p.nk).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let prob = if labels[a] == labels[b] { p_in } else { p_out };
            if rng.gen::<f64>() < prob {
                edges.push((a, b, 1.0));
            }
        }
    }
    Ok((Graph::from_edges(n, edges)?, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedCount {
    /// `ceil(fraction * n)` nodes.
    Fraction(f64),
    Count(usize),
}

impl SeedCount {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            SeedCount::Fraction(f) if (0.0..=1.0).contains(&f) => {
                // guard against 0.03 * 100 = 3.0000000000000004
                let raw = f * n as f64;
                let rounded = raw.round();
                Ok(if (raw - rounded).abs() < 1e-9 {
                    rounded as usize
                } else {
                    raw.ceil() as usize
                })
            }
            SeedCount::Fraction(f) => Err(Error::config(format!(
                "seed fraction must lie in [0, 1], got {f}"
            ))),
            SeedCount::Count(c) if c <= n => Ok(c),
            SeedCount::Count(c) => {
                Err(Error::config(format!("{c} seeds requested from {n} nodes")))
            }
        }
    }
}

/// Draws benchmark nodes: `per_class_min` uniformly from every class, then
/// the remainder uniformly from all other nodes.
pub fn sample_benchmarks<R: Rng>(
    labels: &[usize],
    class_count: usize,
    count: SeedCount,
    per_class_min: usize,
    rng: &mut R,
) -> Result<BenchmarkSets> {
    let n = labels.len();
    let total = count.resolve(n)?;
    let per_class_min = per_class_min.max(1);
    if total < class_count * per_class_min {
        return Err(Error::config(format!(
            "{total} seeds cannot cover {class_count} classes with {per_class_min} each"
        )));
    }
    let mut by_class = vec![Vec::new(); class_count];
    for (i, &c) in labels.iter().enumerate() {
        let slot = by_class
            .get_mut(c)
            .ok_or_else(|| Error::config(format!("label {c} out of range")))?;
        slot.push(i);
    }
    let mut sets = BenchmarkSets::new(n, class_count);
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < per_class_min {
            return Err(Error::config(format!(
                "class {c} has {} nodes, fewer than {per_class_min}",
                members.len()
            )));
        }
        for &i in members.choose_multiple(rng, per_class_min) {
            sets.insert(i, c, Origin::Initial)?;
        }
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !sets.is_benchmark(i)).collect();
    let extra = total - sets.len();
    for &i in rest.choose_multiple(rng, extra) {
        sets.insert(i, labels[i], Origin::Initial)?;
    }
    Ok(sets)
}

/// Percentage of nodes whose label equals the ground truth.
pub fn accuracy(labels: &[usize], truth: &[usize]) -> Result<f64> {
    crate::graph::check_len("labels", truth.len(), labels.len())?;
    if truth.is_empty() {
        return Ok(100.0);
    }
    let hits = labels.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    /// Fresh GN graph per trial.
    #[default]
    Gn,
    /// Edge list plus label file.
    File,
}

/// Experiment descriptor, read from a flat TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSpec {
    pub name: String,
    pub dataset: Dataset,
    pub graph: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub weighted: bool,
    pub affinity: AffinitySource,
    pub k: usize,
    pub nk: usize,
    pub zin: f64,
    pub zout: f64,
    pub seed_fraction: Option<f64>,
    pub seed_count: Option<usize>,
    pub per_class_min: usize,
    pub trials: usize,
    pub seed: u64,
    pub stages: usize,
    pub delta: Delta,
    pub population: StatsPopulation,
    pub tau: f64,
    pub c: f64,
    pub step: Option<f64>,
    pub tol: f64,
    pub residual_tol: f64,
    pub max_iters: usize,
    pub eps: f64,
    pub cap: Option<usize>,
}

impl Default for BenchSpec {
    fn default() -> Self {
        let gn = GnParams::default();
        let solver = SolverConfig::default();
        BenchSpec {
            name: "bench".into(),
            dataset: Dataset::Gn,
            graph: None,
            labels: None,
            weighted: false,
            affinity: AffinitySource::Betweenness,
            k: gn.k,
            nk: gn.nk,
            zin: gn.z_in,
            zout: gn.z_out,
            seed_fraction: None,
            seed_count: None,
            per_class_min: 1,
            trials: 20,
            seed: 0,
            stages: 2,
            delta: Delta::Auto,
            population: StatsPopulation::default(),
            tau: solver.tau,
            c: solver.penalty,
            step: solver.step,
            tol: solver.tol,
            residual_tol: solver.residual_tol,
            max_iters: solver.max_iters,
            eps: DEFAULT_EPS,
            cap: None,
        }
    }
}

impl BenchSpec {
    /// Parses TOML; relative data paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut spec: BenchSpec =
            toml::from_str(text).map_err(|e| Error::config(format!("bench spec: {e}")))?;
        for p in [&mut spec.graph, &mut spec.labels].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn seed_amount(&self) -> Result<SeedCount> {
        match (self.seed_fraction, self.seed_count) {
            (Some(f), None) => Ok(SeedCount::Fraction(f)),
            (None, Some(c)) => Ok(SeedCount::Count(c)),
            (None, None) => Err(Error::config("set one of seed_fraction or seed_count")),
            (Some(_), Some(_)) => Err(Error::config(
                "seed_fraction and seed_count are mutually exclusive",
            )),
        }
    }

    pub fn tsos_config(&self) -> TsosConfig {
        TsosConfig {
            stages: self.stages,
            delta: self.delta,
            population: self.population,
            cap: self.cap,
            eps: self.eps,
            solver: SolverConfig {
                tau: self.tau,
                penalty: self.c,
                step: self.step,
                max_iters: self.max_iters,
                tol: self.tol,
                residual_tol: self.residual_tol,
                audit: false,
            },
        }
    }

    pub fn gn_params(&self) -> GnParams {
        GnParams {
            k: self.k,
            nk: self.nk,
            z_in: self.zin,
            z_out: self.zout,
            seed: self.seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        self.seed_amount()?;
        self.tsos_config().validate()?;
        if self.dataset == Dataset::File && (self.graph.is_none() || self.labels.is_none()) {
            return Err(Error::config("file datasets need both graph and labels"));
        }
        if self.dataset == Dataset::Gn {
            self.gn_params().probabilities()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    /// Final accuracy, absent when the trial failed.
    pub accuracy: Option<f64>,
    /// One entry per configured stage. Stages skipped after an empty
    /// expansion repeat the last computed accuracy.
    pub stage_accuracies: Vec<f64>,
    pub benchmarks_initial: usize,
    pub benchmarks_final: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub name: String,
    pub trials: Vec<TrialRow>,
    /// Mean and sample standard deviation of the final accuracy over the
    /// successful trials.
    pub mean: f64,
    pub std: f64,
    pub stage_means: Vec<f64>,
    pub failures: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl TrialReport {
    /// Aggregates rows in trial order.
    pub fn from_rows(name: impl Into<String>, trials: Vec<TrialRow>) -> Self {
        let ok: Vec<&TrialRow> = trials.iter().filter(|r| r.accuracy.is_some()).collect();
        let finals: Vec<f64> = ok.iter().filter_map(|r| r.accuracy).collect();
        let (mean, std) = mean_std(&finals);
        let stage_count = ok
            .iter()
            .map(|r| r.stage_accuracies.len())
            .max()
            .unwrap_or(0);
        let stage_means = (0..stage_count)
            .map(|s| {
                let xs: Vec<f64> = ok
                    .iter()
                    .filter_map(|r| r.stage_accuracies.get(s).copied())
                    .collect();
                mean_std(&xs).0
            })
            .collect();
        TrialReport {
            name: name.into(),
            failures: trials.len() - ok.len(),
            trials,
            mean,
            std,
            stage_means,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        crate::io::report_json(self)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "# seedpart trials v1\ntrial,accuracy,stage_accuracies,benchmarks_initial,benchmarks_final,converged,error\n",
        );
        for r in &self.trials {
            let stages: Vec<String> = r
                .stage_accuracies
                .iter()
                .map(|&a| crate::fmt_sig(a))
                .collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.trial,
                r.accuracy.map(crate::fmt_sig).unwrap_or_default(),
                stages.join(";"),
                r.benchmarks_initial,
                r.benchmarks_final,
                r.converged,
                r.error.as_deref().unwrap_or("").replace([',', '\n'], " ")
            );
        }
        out
    }
}

struct Prepared {
    affinity: Graph,
    truth: Vec<usize>,
    class_count: usize,
}

fn load_file_dataset(spec: &BenchSpec) -> Result<Prepared> {
    let (graph, labels) = match (&spec.graph, &spec.labels) {
        (Some(g), Some(l)) => (g, l),
        _ => return Err(Error::config("file datasets need both graph and labels")),
    };
    let format = if spec.weighted {
        EdgeFormat::WeightedEdgeList
    } else {
        EdgeFormat::EdgeList
    };
    let g = load_graph(graph, format)?;
    let truth = load_labels(labels, &g)?;
    Ok(Prepared {
        affinity: build_affinity(&g, spec.affinity)?,
        class_count: truth.class_count(),
        truth: truth.classes,
    })
}

/// Random stream of one trial: the base seed selects the key, the trial
/// index selects the stream.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn run_one(spec: &BenchSpec, shared: Option<&Prepared>, trial: usize) -> Result<TrialRow> {
    let mut rng = trial_rng(spec.seed, trial);
    let generated;
    let data = match shared {
        Some(d) => d,
        None => {
            let (g, truth) = generate_gn_with(&spec.gn_params(), &mut rng)?;
            generated = Prepared {
                affinity: build_affinity(&g, spec.affinity)?,
                truth,
                class_count: spec.k,
            };
            &generated
        }
    };
    let seeds = sample_benchmarks(
        &data.truth,
        data.class_count,
        spec.seed_amount()?,
        spec.per_class_min,
        &mut rng,
    )?;
    let cfg = spec.tsos_config();
    let result = run_tsos_on_affinity(&data.affinity, &seeds, &cfg, Some(&data.truth))?;
    let mut stage_accuracies: Vec<f64> = result.stages.iter().filter_map(|s| s.accuracy).collect();
    let last = stage_accuracies.last().copied().unwrap_or(f64::NAN);
    stage_accuracies.resize(cfg.stages, last);
    Ok(TrialRow {
        trial,
        accuracy: result.final_accuracy(),
        stage_accuracies,
        benchmarks_initial: seeds.len(),
        benchmarks_final: result.benchmarks.len(),
        converged: result.diagnostics.iter().all(|d| d.converged),
        error: None,
    })
}

/// Runs every trial of `spec`, in parallel on `jobs` threads (all cores when
/// `None`). Rows come back in trial order and do not depend on `jobs`.
pub fn run_trials(spec: &BenchSpec, jobs: Option<usize>) -> Result<TrialReport> {
    spec.validate()?;
    let shared = match spec.dataset {
        Dataset::File => Some(load_file_dataset(spec)?),
        Dataset::Gn => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let rows: Vec<TrialRow> = pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| {
                run_one(spec, shared.as_ref(), t).unwrap_or_else(|e| {
                    log::warn!("trial {t} failed: {e}");
                    TrialRow {
                        trial: t,
                        accuracy: None,
                        stage_accuracies: Vec::new(),
                        benchmarks_initial: 0,
                        benchmarks_final: 0,
                        converged: false,
                        error: Some(e.to_string()),
                    }
                })
            })
            .collect()
    });
    Ok(TrialReport::from_rows(spec.name.clone(), rows))
}
