//! Sparse undirected weighted graph and the edge/node difference operators.
//!
//! Every edge is stored once with `tail < head`. That orientation fixes the
//! sign conventions used throughout the crate:
//!
//! - `difference(u)[e] = u[head] - u[tail]`
//! - `gradient(u)[e]   = w[e] * (u[head] - u[tail])`
//! - `divergence(f)[i] = sum(f[e] : head(e) = i) - sum(f[e] : tail(e) = i)`
//!
//! so that `<difference(u), f> = <u, divergence(f)>` for every `u`, `f`.

use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
}

/// Immutable undirected graph in compressed adjacency form.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    // (neighbor, edge index), grouped by node via `offsets`
    adjacency: Vec<(usize, usize)>,
    degree: Vec<f64>,
    ids: Vec<u64>,
}

impl Graph {
    /// Builds a graph on nodes `0..n` whose external ids equal their index.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        Self::build((0..n as u64).collect(), edges)
    }

    /// Builds a graph from edges between arbitrary external ids. Dense
    /// indices are assigned in increasing id order.
    pub fn from_id_edges<I>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, u64, f64)>,
    {
        let edges: Vec<(u64, u64, f64)> = edges.into_iter().collect();
        let mut ids: Vec<u64> = edges.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        ids.sort_unstable();
        ids.dedup();
        let index = |id: u64| ids.binary_search(&id).expect("id collected above");
        let dense: Vec<(usize, usize, f64)> = edges
            .iter()
            .map(|&(a, b, w)| (index(a), index(b), w))
            .collect();
        Self::build(ids.clone(), dense)
    }

    fn build<I>(ids: Vec<u64>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = ids.len();
        let mut seen = HashSet::new();
        let mut stored = Vec::new();
        for (a, b, w) in edges {
            for node in [a, b] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop { node: ids[a] });
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidWeight {
                    a: ids[a],
                    b: ids[b],
                    weight: w,
                });
            }
            let (tail, head) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((tail, head)) {
                return Err(Error::DuplicateEdge {
                    a: ids[tail],
                    b: ids[head],
                });
            }
            stored.push(Edge {
                tail,
                head,
                weight: w,
            });
        }
        Ok(Self::assemble(ids, stored))
    }

    fn assemble(ids: Vec<u64>, edges: Vec<Edge>) -> Self {
        let n = ids.len();
        let mut counts = vec![0usize; n];
        for e in &edges {
            counts[e.tail] += 1;
            counts[e.head] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + counts[i];
        }
        let mut fill = offsets.clone();
        let mut adjacency = vec![(0usize, 0usize); offsets[n]];
        let mut degree = vec![0.0; n];
        for (idx, e) in edges.iter().enumerate() {
            adjacency[fill[e.tail]] = (e.head, idx);
            fill[e.tail] += 1;
            adjacency[fill[e.head]] = (e.tail, idx);
            fill[e.head] += 1;
            degree[e.tail] += e.weight;
            degree[e.head] += e.weight;
        }
        Graph {
            edges,
            offsets,
            adjacency,
            degree,
            ids,
        }
    }

    /// Same topology and ids, new per-edge weights (in stored edge order).
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        check_len("edge weights", self.edge_count(), weights.len())?;
        let mut edges = self.edges.clone();
        for (e, &w) in edges.iter_mut().zip(weights) {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidWeight {
                    a: self.ids[e.tail],
                    b: self.ids[e.head],
                    weight: w,
                });
            }
            e.weight = w;
        }
        Ok(Self::assemble(self.ids.clone(), edges))
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.iter().map(|e| e.weight)
    }

    /// `(neighbor, edge index)` pairs incident to `node`.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Number of incident edges, ignoring weights.
    pub fn unweighted_degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    /// Weighted degree `d_ii = sum_j w_ij`.
    pub fn degree(&self, node: usize) -> f64 {
        self.degree[node]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    pub fn max_degree(&self) -> f64 {
        self.degree.iter().copied().fold(0.0, f64::max)
    }

    /// Average unweighted degree `2|E| / n`.
    pub fn average_degree(&self) -> f64 {
        if self.node_count() == 0 {
            0.0
        } else {
            2.0 * self.edge_count() as f64 / self.node_count() as f64
        }
    }

    pub fn external_id(&self, node: usize) -> u64 {
        self.ids[node]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Index of the edge joining `a` and `b`, if any.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.neighbors(a)
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, e)| e)
    }

    /// Weight of the pair `(a, b)`; zero when they are not adjacent.
    pub fn weight_between(&self, a: usize, b: usize) -> f64 {
        self.find_edge(a, b).map_or(0.0, |e| self.edges[e].weight)
    }

    /// Weighted gradient: `w_ij * (u_j - u_i)` per stored edge.
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("node function", self.node_count(), u.len())?;
        Ok(self
            .edges
            .iter()
            .map(|e| e.weight * (u[e.head] - u[e.tail]))
            .collect())
    }

    /// Unweighted difference `u_j - u_i` per stored edge.
    pub fn difference(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("node function", self.node_count(), u.len())?;
        Ok(self.edges.iter().map(|e| u[e.head] - u[e.tail]).collect())
    }

    /// Signed divergence of an edge function: `+f` at the head, `-f` at the tail.
    pub fn divergence(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len("edge function", self.edge_count(), f.len())?;
        let mut out = vec![0.0; self.node_count()];
        self.divergence_into(f, &mut out);
        Ok(out)
    }

    pub(crate) fn divergence_into(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (e, &v) in self.edges.iter().zip(f) {
            out[e.head] += v;
            out[e.tail] -= v;
        }
    }

    /// Total variation `sum_e w_ij |u_j - u_i|`.
    pub fn tv_norm(&self, u: &[f64]) -> Result<f64> {
        Ok(self.gradient(u)?.iter().map(|g| g.abs()).sum())
    }

    /// Connected component index per node, numbered in order of first node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &(w, _) in self.neighbors(v) {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k2() -> Graph {
        Graph::from_edges(2, [(0, 1, 1.0)]).unwrap()
    }

    fn p3(w: f64) -> Graph {
        Graph::from_edges(3, [(0, 1, w), (1, 2, w)]).unwrap()
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(k2().gradient(&[0.0, 1.0]).unwrap(), vec![1.0]);
        assert_eq!(p3(0.5).gradient(&[0.0, 1.0, 0.0]).unwrap(), vec![0.5, -0.5]);
        assert!(p3(0.7)
            .gradient(&[3.0, 3.0, 3.0])
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(
            k2().gradient(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(k2().divergence(&[1.0, 2.0]).is_err());
        assert!(k2().tv_norm(&[]).is_err());
    }

    #[test]
    fn tv_norm_examples() {
        assert_eq!(k2().tv_norm(&[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(p3(1.0).tv_norm(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
        let triangles = Graph::from_edges(
            6,
            [
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 1.0),
                (3, 4, 1.0),
                (4, 5, 1.0),
                (3, 5, 1.0),
            ],
        )
        .unwrap();
        assert_eq!(
            triangles.tv_norm(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn divergence_examples() {
        assert_eq!(k2().divergence(&[0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(k2().divergence(&[1.0]).unwrap(), vec![-1.0, 1.0]);
        // Star with center 3; every stored edge is (leaf, center) since leaf < center.
        let star = Graph::from_edges(4, [(0, 3, 1.0), (1, 3, 1.0), (2, 3, 1.0)]).unwrap();
        let div = star.divergence(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(div[3], 3.0);
        assert_eq!(&div[..3], &[-1.0, -1.0, -1.0]);
    }

    #[test]
    fn construction_rejects_bad_edges() {
        assert!(matches!(
            Graph::from_edges(2, [(1, 1, 1.0)]),
            Err(Error::SelfLoop { node: 1 })
        ));
        assert!(matches!(
            Graph::from_edges(2, [(0, 1, 1.0), (1, 0, 2.0)]),
            Err(Error::DuplicateEdge { .. })
        ));
        assert!(matches!(
            Graph::from_edges(2, [(0, 1, -0.5)]),
            Err(Error::InvalidWeight { .. })
        ));
        assert!(Graph::from_edges(2, [(0, 1, f64::NAN)]).is_err());
        assert!(matches!(
            Graph::from_edges(2, [(0, 2, 1.0)]),
            Err(Error::NodeOutOfRange { node: 2, n: 2 })
        ));
    }

    #[test]
    fn degrees_and_symmetry() {
        let g = Graph::from_id_edges([(10, 30, 0.5), (30, 20, 2.0)]).unwrap();
        assert_eq!(g.ids(), &[10, 20, 30]);
        assert_eq!(g.degrees(), &[0.5, 2.0, 2.5]);
        assert_eq!(
            g.edges()[1],
            Edge {
                tail: 1,
                head: 2,
                weight: 2.0
            }
        );
        for v in 0..g.node_count() {
            for &(w, e) in g.neighbors(v) {
                assert!(g.neighbors(w).contains(&(v, e)));
            }
        }
        assert_eq!(g.weight_between(0, 1), 0.0);
        assert_eq!(g.weight_between(2, 0), 0.5);
    }

    #[test]
    fn components_of_disjoint_union() {
        let g = Graph::from_edges(5, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(g.components(), vec![0, 0, 1, 1, 2]);
    }
}
