//! Benchmark-conditioned class probabilities and the unary (region force)
//! costs of the partition model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::ClassMatrix;

/// Default clamp applied to probabilities before taking log-odds.
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Initial,
    /// Added by confidence expansion after the given (1-based) stage.
    Expanded {
        stage: usize,
    },
}

/// Disjoint per-class sets of nodes with known labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSets {
    class_of: Vec<Option<usize>>,
    origin: Vec<Option<Origin>>,
    members: Vec<Vec<usize>>,
}

impl BenchmarkSets {
    pub fn new(node_count: usize, class_count: usize) -> Self {
        BenchmarkSets {
            class_of: vec![None; node_count],
            origin: vec![None; node_count],
            members: vec![Vec::new(); class_count],
        }
    }

    /// Marks `node` as a benchmark of `class`. Re-inserting a node into its
    /// own class is a no-op; moving it to another class is an error.
    pub fn insert(&mut self, node: usize, class: usize, origin: Origin) -> Result<bool> {
        if node >= self.class_of.len() {
            return Err(Error::NodeOutOfRange {
                node,
                n: self.class_of.len(),
            });
        }
        if class >= self.members.len() {
            return Err(Error::config(format!(
                "benchmark class {class} out of range for {} classes",
                self.members.len()
            )));
        }
        match self.class_of[node] {
            Some(c) if c == class => Ok(false),
            Some(c) => Err(Error::config(format!(
                "node {node} is already a benchmark of class {c}"
            ))),
            None => {
                self.class_of[node] = Some(class);
                self.origin[node] = Some(origin);
                self.members[class].push(node);
                Ok(true)
            }
        }
    }

    pub fn from_assignments(
        node_count: usize,
        class_count: usize,
        seeds: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut s = Self::new(node_count, class_count);
        for (node, class) in seeds {
            s.insert(node, class, Origin::Initial)?;
        }
        Ok(s)
    }

    pub fn node_count(&self) -> usize {
        self.class_of.len()
    }

    pub fn class_count(&self) -> usize {
        self.members.len()
    }

    pub fn class_of(&self, node: usize) -> Option<usize> {
        self.class_of[node]
    }

    pub fn origin(&self, node: usize) -> Option<Origin> {
        self.origin[node]
    }

    pub fn is_benchmark(&self, node: usize) -> bool {
        self.class_of[node].is_some()
    }

    pub fn members(&self, class: usize) -> &[usize] {
        &self.members[class]
    }

    pub fn len(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Every class must own at least one benchmark node.
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::config("no classes"));
        }
        match self.members.iter().position(Vec::is_empty) {
            Some(k) => Err(Error::config(format!("class {k} has no benchmark node"))),
            None => Ok(()),
        }
    }
}

/// Symmetrically normalized affinity `w_ij / sqrt(d_ii d_jj)` per stored edge.
#[derive(Debug, Clone)]
pub struct NormalizedAffinity {
    pub values: Vec<f64>,
    /// Nodes with zero weighted degree.
    pub isolated: Vec<usize>,
}

pub fn normalized_affinity(g: &Graph) -> NormalizedAffinity {
    let d = g.degrees();
    let values = g
        .edges()
        .iter()
        .map(|e| {
            let denom = (d[e.tail] * d[e.head]).sqrt();
            if denom > 0.0 {
                e.weight / denom
            } else {
                0.0
            }
        })
        .collect();
    let isolated = (0..g.node_count()).filter(|&i| d[i] <= 0.0).collect();
    NormalizedAffinity { values, isolated }
}

/// Per-node class probabilities. Rows with no benchmark neighbour fall back to
/// the uniform distribution; benchmark rows are one-hot on their own class.
pub fn class_probabilities(g: &Graph, s: &BenchmarkSets) -> Result<ClassMatrix> {
    crate::graph::check_len("benchmark sets", g.node_count(), s.node_count())?;
    s.validate()?;
    let k = s.class_count();
    let norm = normalized_affinity(g);
    if !norm.isolated.is_empty() {
        log::debug!(
            "{} nodes have zero degree; uniform rows",
            norm.isolated.len()
        );
    }
    let inv_size: Vec<f64> = (0..k).map(|c| 1.0 / s.members(c).len() as f64).collect();

    let mut p = ClassMatrix::zeros(g.node_count(), k);
    for i in 0..g.node_count() {
        let row = p.row_mut(i);
        if let Some(c) = s.class_of(i) {
            row[c] = 1.0;
            continue;
        }
        for &(j, e) in g.neighbors(i) {
            if let Some(c) = s.class_of(j) {
                let w = norm.values[e];
                row[c] += w * w * inv_size[c];
            }
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|x| *x /= total);
        } else {
            row.fill(1.0 / k as f64);
        }
    }
    Ok(p)
}

/// Region-force costs `M_ik = log((1 - p) / p)` with `p` clamped to
/// `[eps, 1 - eps]`. Lower cost means the class is more likely.
pub fn unary_costs(p: &ClassMatrix, eps: f64) -> Result<ClassMatrix> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::config(format!(
            "eps must lie in (0, 0.5), got {eps}"
        )));
    }
    let mut m = p.clone();
    for v in m.as_mut_slice() {
        let x = v.clamp(eps, 1.0 - eps);
        *v = ((1.0 - x) / x).ln();
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star3() -> Graph {
        Graph::from_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap()
    }

    #[test]
    fn normalized_affinity_examples() {
        let k2 = Graph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        assert_eq!(normalized_affinity(&k2).values, vec![1.0]);

        let p3 = Graph::from_edges(3, [(0, 1, 0.5), (1, 2, 0.5)]).unwrap();
        let v = normalized_affinity(&p3).values;
        assert!((v[0] - 0.5 / 0.5f64.sqrt()).abs() < 1e-15);
        assert!((v[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let v = normalized_affinity(&star3()).values;
        for x in v {
            assert!((x - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_nodes_are_flagged() {
        let g = Graph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        assert_eq!(normalized_affinity(&g).isolated, vec![2]);
        let s = BenchmarkSets::from_assignments(3, 2, [(0, 0), (1, 1)]).unwrap();
        let p = class_probabilities(&g, &s).unwrap();
        assert_eq!(p.row(2), &[0.5, 0.5]);
    }

    #[test]
    fn probability_rows() {
        // path 0-1-2-3-4 with benchmarks 0 (class 0) and 4 (class 1)
        let g = Graph::from_edges(5, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).unwrap();
        let s = BenchmarkSets::from_assignments(5, 2, [(0, 0), (4, 1)]).unwrap();
        let p = class_probabilities(&g, &s).unwrap();
        assert_eq!(p.row(0), &[1.0, 0.0]);
        assert_eq!(p.row(1), &[1.0, 0.0]);
        assert_eq!(p.row(2), &[0.5, 0.5]);
        assert_eq!(p.row(3), &[0.0, 1.0]);
        assert_eq!(p.row(4), &[0.0, 1.0]);
    }

    #[test]
    fn barbell_rows_mirror() {
        // triangles {0,1,2} and {3,4,5} joined by 2-3; seeds at mirror nodes 0 and 5
        let g = Graph::from_edges(
            6,
            [
                (0, 1, 1.0),
                (0, 2, 1.0),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (3, 4, 1.0),
                (3, 5, 1.0),
                (4, 5, 1.0),
            ],
        )
        .unwrap();
        let s = BenchmarkSets::from_assignments(6, 2, [(0, 0), (5, 1)]).unwrap();
        let p = class_probabilities(&g, &s).unwrap();
        for (a, b) in [(1, 4), (2, 3)] {
            assert_eq!(p.row(a)[0], p.row(b)[1]);
            assert_eq!(p.row(a)[1], p.row(b)[0]);
        }
    }

    #[test]
    fn empty_class_is_a_config_error() {
        let g = star3();
        let s = BenchmarkSets::from_assignments(4, 2, [(0, 0)]).unwrap();
        assert!(matches!(class_probabilities(&g, &s), Err(Error::Config(_))));
    }

    #[test]
    fn unary_cost_values() {
        let p = ClassMatrix::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let m = unary_costs(&p, 1e-6).unwrap();
        assert_eq!(m.get(0, 0), 0.0);
        let expected = (1e-6f64 / (1.0 - 1e-6)).ln();
        assert!((m.get(1, 0) - expected).abs() < 1e-9);
        assert!((m.get(1, 0) + 13.8155).abs() < 1e-4);
        assert!((m.get(1, 1) + expected).abs() < 1e-9);

        let uniform = ClassMatrix::filled(1, 4, 0.25);
        let m = unary_costs(&uniform, DEFAULT_EPS).unwrap();
        for &v in m.row(0) {
            assert!((v - 3f64.ln()).abs() < 1e-15);
            assert!((v - 1.0986).abs() < 1e-4);
        }
    }

    #[test]
    fn unary_eps_range() {
        let p = ClassMatrix::filled(1, 2, 0.5);
        assert!(unary_costs(&p, 0.0).is_err());
        assert!(unary_costs(&p, 0.5).is_err());
        assert!(unary_costs(&p, f64::NAN).is_err());
    }

    #[test]
    fn benchmark_sets_stay_disjoint() {
        let mut s = BenchmarkSets::new(3, 2);
        assert!(s.insert(0, 0, Origin::Initial).unwrap());
        assert!(!s.insert(0, 0, Origin::Expanded { stage: 1 }).unwrap());
        assert!(s.insert(0, 1, Origin::Initial).is_err());
        assert_eq!(s.origin(0), Some(Origin::Initial));
        assert_eq!(s.counts(), vec![1, 0]);
        assert!(s.validate().is_err());
    }
}
