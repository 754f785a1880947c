//! Staged optimization: solve, promote confidently labelled nodes next to
//! benchmarks into the benchmark sets, and solve again.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::benchgen::accuracy;
use crate::centrality::{betweenness_affinity, coreness};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::ClassMatrix;
use crate::region_force::{class_probabilities, unary_costs, BenchmarkSets, Origin, DEFAULT_EPS};
use crate::solver::{solve, Diagnostics, SolverConfig};

/// Expansion threshold multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Delta {
    /// Chosen from the average degree by [`delta_auto`].
    #[default]
    Auto,
    Fixed(f64),
}

impl Delta {
    pub fn resolve(self, g: &Graph) -> f64 {
        match self {
            Delta::Auto => delta_auto(g),
            Delta::Fixed(d) => d,
        }
    }
}

impl FromStr for Delta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Delta::Auto);
        }
        let d: f64 = s
            .parse()
            .map_err(|_| Error::config(format!("delta must be 'auto' or a number, got '{s}'")))?;
        if d.is_nan() || d < 0.0 {
            return Err(Error::config(format!(
                "delta must be non-negative, got {d}"
            )));
        }
        Ok(Delta::Fixed(d))
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta::Auto => f.write_str("auto"),
            Delta::Fixed(d) => write!(f, "{d}"),
        }
    }
}

impl Serialize for Delta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Delta::Auto => s.serialize_str("auto"),
            Delta::Fixed(d) => s.serialize_f64(*d),
        }
    }
}

impl<'de> Deserialize<'de> for Delta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Delta::from_str(&x.to_string()),
            Raw::Text(s) => Delta::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Where edge weights come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffinitySource {
    /// Inverse edge betweenness of the topology.
    #[default]
    Betweenness,
    /// The weights already on the graph.
    Given,
}

impl FromStr for AffinitySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "betweenness" => Ok(AffinitySource::Betweenness),
            "given" | "weights" => Ok(AffinitySource::Given),
            _ => Err(Error::config(format!(
                "affinity must be 'betweenness' or 'given', got '{s}'"
            ))),
        }
    }
}

pub fn build_affinity(g: &Graph, source: AffinitySource) -> Result<Graph> {
    match source {
        AffinitySource::Betweenness => betweenness_affinity(g),
        AffinitySource::Given => Ok(g.clone()),
    }
}

/// Which free nodes enter the per-class mean and deviation of confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsPopulation {
    /// Nodes currently carrying the class label.
    Labelled,
    /// Every free node, scored against the class. Nodes far from any
    /// benchmark score zero and pull the mean down, so the threshold picks
    /// out the strongest links to each benchmark set.
    #[default]
    AllFree,
}

impl FromStr for StatsPopulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labelled" | "labeled" => Ok(StatsPopulation::Labelled),
            "all_free" | "all-free" => Ok(StatsPopulation::AllFree),
            _ => Err(Error::config(format!(
                "population must be 'labelled' or 'all_free', got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsosConfig {
    pub stages: usize,
    pub delta: Delta,
    pub population: StatsPopulation,
    /// Upper bound on nodes promoted per class per stage.
    pub cap: Option<usize>,
    pub eps: f64,
    pub solver: SolverConfig,
}

impl Default for TsosConfig {
    fn default() -> Self {
        TsosConfig {
            stages: 2,
            delta: Delta::Auto,
            population: StatsPopulation::AllFree,
            cap: None,
            eps: DEFAULT_EPS,
            solver: SolverConfig::default(),
        }
    }
}

impl TsosConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::config("stages must be at least 1"));
        }
        if let Delta::Fixed(d) = self.delta {
            if d.is_nan() || d < 0.0 {
                return Err(Error::config(format!(
                    "delta must be non-negative, got {d}"
                )));
            }
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::config(format!(
                "eps must lie in (0, 0.5), got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Degree rule: 3 for average degree at least 5, 2 from 3 up to 5, else 1.
pub fn delta_auto(g: &Graph) -> f64 {
    let d = g.average_degree();
    if d >= 5.0 {
        3.0
    } else if d >= 3.0 {
        2.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    /// Every scored node of the class has the same value.
    pub constant: bool,
}

/// Confidence of each free node in its current label.
#[derive(Debug, Clone, PartialEq)]
pub struct Confidence {
    /// `None` for benchmark nodes.
    pub values: Vec<Option<f64>>,
    pub labels: Vec<usize>,
    /// `None` for classes without any scored node.
    pub stats: Vec<Option<ClassStats>>,
}

/// `pi_ik = gamma_i * max w_ij` over benchmark neighbours `j` of class `k`,
/// zero when there are none. Each free node keeps the score of its own
/// label; class statistics use the population standard deviation over the
/// chosen population.
pub fn confidence(
    g: &Graph,
    gamma: &[usize],
    s: &BenchmarkSets,
    labels: &[usize],
    population: StatsPopulation,
) -> Result<Confidence> {
    let n = g.node_count();
    crate::graph::check_len("coreness", n, gamma.len())?;
    crate::graph::check_len("labels", n, labels.len())?;
    crate::graph::check_len("benchmark sets", n, s.node_count())?;
    let k = s.class_count();
    if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
        return Err(Error::config(format!(
            "label {bad} out of range for {k} classes"
        )));
    }

    let mut scores = ClassMatrix::zeros(n, k);
    for i in (0..n).filter(|&i| !s.is_benchmark(i)) {
        let row = scores.row_mut(i);
        for &(j, e) in g.neighbors(i) {
            if let Some(c) = s.class_of(j) {
                row[c] = row[c].max(g.edges()[e].weight);
            }
        }
        row.iter_mut().for_each(|v| *v *= gamma[i] as f64);
    }
    let values: Vec<Option<f64>> = (0..n)
        .map(|i| (!s.is_benchmark(i)).then(|| scores.get(i, labels[i])))
        .collect();

    let stats = (0..k)
        .map(|c| {
            let class_values: Vec<f64> = (0..n)
                .filter(|&i| !s.is_benchmark(i))
                .filter(|&i| population == StatsPopulation::AllFree || labels[i] == c)
                .map(|i| scores.get(i, c))
                .collect();
            if class_values.is_empty() {
                log::warn!("class {c} has no free nodes; skipped for expansion");
                return None;
            }
            let count = class_values.len();
            let mean = class_values.iter().sum::<f64>() / count as f64;
            let var = class_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
            let first = class_values[0];
            Some(ClassStats {
                mean,
                std: var.sqrt(),
                count,
                constant: class_values.iter().all(|&v| v == first),
            })
        })
        .collect();

    Ok(Confidence {
        values,
        labels: labels.to_vec(),
        stats,
    })
}

/// Nodes selected for promotion: free nodes with positive confidence at or
/// above `mean + delta * std` of their class. When a class is constant every
/// node with positive confidence qualifies. `cap` keeps the most confident
/// ones (lowest index first on ties). Sorted by node index.
pub fn select_expansion(conf: &Confidence, delta: f64, cap: Option<usize>) -> Vec<usize> {
    if delta.is_infinite() {
        return Vec::new();
    }
    let mut per_class: Vec<Vec<(f64, usize)>> = vec![Vec::new(); conf.stats.len()];
    for (i, v) in conf.values.iter().enumerate() {
        let Some(pi) = *v else { continue };
        let class = conf.labels[i];
        let Some(st) = conf.stats[class] else {
            continue;
        };
        let qualifies = pi > 0.0 && (st.constant || pi >= st.mean + delta * st.std);
        if qualifies {
            per_class[class].push((pi, i));
        }
    }
    let mut chosen = Vec::new();
    for mut nodes in per_class {
        if let Some(cap) = cap {
            nodes.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            nodes.truncate(cap);
        }
        chosen.extend(nodes.into_iter().map(|(_, i)| i));
    }
    chosen.sort_unstable();
    chosen
}

/// Adds the selected nodes to the benchmark sets of their current label.
/// Returns the enlarged sets and the promoted nodes.
pub fn expand_benchmarks(
    conf: &Confidence,
    s: &BenchmarkSets,
    delta: f64,
    cap: Option<usize>,
    stage: usize,
) -> Result<(BenchmarkSets, Vec<usize>)> {
    let mut out = s.clone();
    let mut added = Vec::new();
    for i in select_expansion(conf, delta, cap) {
        if out.insert(i, conf.labels[i], Origin::Expanded { stage })? {
            added.push(i);
        }
    }
    Ok((out, added))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub converged: bool,
    pub residual_inf: f64,
    pub dual_objective: f64,
    pub dual_bound: f64,
    pub primal_energy: f64,
    pub rounded_energy: f64,
}

impl From<&Diagnostics> for SolverSummary {
    fn from(d: &Diagnostics) -> Self {
        SolverSummary {
            iterations: d.iterations,
            converged: d.converged,
            residual_inf: d.residual_inf,
            dual_objective: d.dual_objective,
            dual_bound: d.dual_bound,
            primal_energy: d.primal_energy,
            rounded_energy: d.rounded_energy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    /// Benchmark nodes per class used by this stage's solve.
    pub benchmark_counts: Vec<usize>,
    /// Nodes (external ids) promoted just before this stage.
    pub promoted: Vec<u64>,
    pub accuracy: Option<f64>,
    pub solver: SolverSummary,
}

#[derive(Debug, Clone)]
pub struct TsosResult {
    pub labels: Vec<usize>,
    pub psi: ClassMatrix,
    pub probabilities: ClassMatrix,
    pub benchmarks: BenchmarkSets,
    pub delta: f64,
    pub stages: Vec<StageReport>,
    /// Full solver diagnostics per executed stage.
    pub diagnostics: Vec<Diagnostics>,
}

impl TsosResult {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.stages.last().and_then(|s| s.accuracy)
    }
}

/// Builds the affinity from `g_raw` and runs the staged optimization.
pub fn run_tsos(
    g_raw: &Graph,
    source: AffinitySource,
    s0: &BenchmarkSets,
    cfg: &TsosConfig,
    truth: Option<&[usize]>,
) -> Result<TsosResult> {
    let affinity = build_affinity(g_raw, source)?;
    run_tsos_on_affinity(&affinity, s0, cfg, truth)
}

/// Staged optimization on a graph whose weights already are affinities.
/// Coreness is taken from the same topology.
pub fn run_tsos_on_affinity(
    g: &Graph,
    s0: &BenchmarkSets,
    cfg: &TsosConfig,
    truth: Option<&[usize]>,
) -> Result<TsosResult> {
    cfg.validate()?;
    s0.validate()?;
    if let Some(t) = truth {
        crate::graph::check_len("ground truth", g.node_count(), t.len())?;
    }
    let delta = cfg.delta.resolve(g);
    let gamma = coreness(g);
    let k = s0.class_count();

    let mut bench = s0.clone();
    let mut p = class_probabilities(g, &bench)?;
    let mut psi_init = p.clone();
    let mut stages = Vec::new();
    let mut diagnostics = Vec::new();
    let mut promoted = Vec::new();
    let mut result = None;

    for stage in 1..=cfg.stages {
        let m = unary_costs(&p, cfg.eps)?;
        let sol = solve(g, &m, &bench, &cfg.solver, &psi_init)?;
        let labels = sol.partition.labels.clone();
        let acc = truth.map(|t| accuracy(&labels, t)).transpose()?;
        log::info!(
            "stage {stage}: {} benchmarks, {} iterations{}",
            bench.len(),
            sol.diagnostics.iterations,
            acc.map(|a| format!(", accuracy {a:.2}%"))
                .unwrap_or_default()
        );
        stages.push(StageReport {
            stage,
            benchmark_counts: bench.counts(),
            promoted: promoted.iter().map(|&i| g.external_id(i)).collect(),
            accuracy: acc,
            solver: SolverSummary::from(&sol.diagnostics),
        });
        diagnostics.push(sol.diagnostics);
        let psi = sol.partition.psi;

        if stage < cfg.stages {
            let conf = confidence(g, &gamma, &bench, &labels, cfg.population)?;
            let (next, added) = expand_benchmarks(&conf, &bench, delta, cfg.cap, stage)?;
            if added.is_empty() {
                log::info!("stage {stage}: no node passed the confidence threshold");
                result = Some((labels, psi));
                break;
            }
            bench = next;
            promoted = added;
            p = class_probabilities(g, &bench)?;
            psi_init = psi;
        } else {
            result = Some((labels, psi));
        }
    }

    let (labels, psi) = result.expect("at least one stage runs");
    debug_assert_eq!(psi.cols(), k);
    Ok(TsosResult {
        labels,
        psi,
        probabilities: p,
        benchmarks: bench,
        delta,
        stages,
        diagnostics,
    })
}
