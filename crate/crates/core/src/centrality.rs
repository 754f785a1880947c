//! Structural centralities computed on the unweighted topology: edge
//! betweenness, the betweenness-derived affinity, and k-shell coreness.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Edge betweenness with hop-count shortest paths.
///
/// For each stored edge, the sum over unordered node pairs `{l, k}` of the
/// fraction of shortest `l`-`k` paths using that edge. Pairs with no
/// connecting path contribute nothing.
pub fn edge_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let m = g.edge_count();
    if n == 0 || m == 0 {
        return vec![0.0; m];
    }
    // Chunking depends only on n so the summation order, and therefore the
    // result, is independent of the thread pool.
    let chunk = 16.max(n.div_ceil(64));
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(chunk)
        .map(|block| {
            let mut acc = vec![0.0; m];
            let mut scratch = BfsScratch::new(n);
            for &s in block {
                scratch.accumulate(g, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; m];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    // every unordered pair was visited from both endpoints
    total.iter_mut().for_each(|t| *t *= 0.5);
    total
}

struct BfsScratch {
    dist: Vec<usize>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl BfsScratch {
    fn new(n: usize) -> Self {
        BfsScratch {
            dist: vec![usize::MAX; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
        }
    }

    fn accumulate(&mut self, g: &Graph, source: usize, acc: &mut [f64]) {
        for &v in &self.order {
            self.dist[v] = usize::MAX;
            self.sigma[v] = 0.0;
            self.delta[v] = 0.0;
        }
        self.order.clear();

        self.dist[source] = 0;
        self.sigma[source] = 1.0;
        self.queue.push_back(source);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            for &(w, _) in g.neighbors(v) {
                if self.dist[w] == usize::MAX {
                    self.dist[w] = self.dist[v] + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }

        for &w in self.order.iter().rev() {
            if w == source {
                continue;
            }
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            for &(v, e) in g.neighbors(w) {
                if self.dist[v] != usize::MAX && self.dist[v] + 1 == self.dist[w] {
                    let c = self.sigma[v] * coeff;
                    acc[e] += c;
                    self.delta[v] += c;
                }
            }
        }
    }
}

/// Affinity `w_ij = 1 / BCL(e_ij)` on the same edge set.
pub fn affinity_from_betweenness(g: &Graph, betweenness: &[f64]) -> Result<Graph> {
    crate::graph::check_len("edge betweenness", g.edge_count(), betweenness.len())?;
    let mut weights = Vec::with_capacity(betweenness.len());
    for (e, &b) in g.edges().iter().zip(betweenness) {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Invariant(format!(
                "edge ({}, {}) has betweenness {b}",
                g.external_id(e.tail),
                g.external_id(e.head)
            )));
        }
        weights.push(1.0 / b);
    }
    g.with_weights(&weights)
}

/// Betweenness affinity of an unweighted network in one call.
pub fn betweenness_affinity(g: &Graph) -> Result<Graph> {
    affinity_from_betweenness(g, &edge_betweenness(g))
}

/// k-shell index of every node by bucket peeling (Batagelj–Zaversnik).
/// Edge weights are ignored.
pub fn coreness(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let mut degree: Vec<usize> = (0..n).map(|v| g.unweighted_degree(v)).collect();
    let max_deg = degree.iter().copied().max().unwrap_or(0);

    // nodes sorted by current degree, with bucket start offsets
    let mut bin = vec![0usize; max_deg + 2];
    for &d in &degree {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let count = *b;
        *b = start;
        start += count;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0usize; n];
    for v in 0..n {
        pos[v] = bin[degree[v]];
        vert[pos[v]] = v;
        bin[degree[v]] += 1;
    }
    for d in (1..bin.len()).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;

    for i in 0..n {
        let v = vert[i];
        for &(u, _) in g.neighbors(v) {
            if degree[u] > degree[v] {
                let du = degree[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw];
                if u != w {
                    vert.swap(pu, pw);
                    pos[u] = pw;
                    pos[w] = pu;
                }
                bin[du] += 1;
                degree[u] -= 1;
            }
        }
    }
    degree
}
