//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use seedpart::io::{self, EdgeFormat, Labels};
use seedpart::solver::primal_energy;
use seedpart::{BenchmarkSets, ClassMatrix, Graph, Origin};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn karate() -> (Graph, Labels) {
    let dir = data_dir();
    let g = io::load_graph(dir.join("karate_edges.txt"), EdgeFormat::EdgeList).unwrap();
    let labels = io::load_labels(dir.join("karate_labels.txt"), &g).unwrap();
    (g, labels)
}

/// One benchmark per faction: v17 (Mr. Hi) and v27 (Officer).
pub fn karate_seeds(g: &Graph, labels: &Labels) -> BenchmarkSets {
    let mut s = BenchmarkSets::new(g.node_count(), labels.class_count());
    for id in [17, 27] {
        let v = g.index_of(id).unwrap();
        s.insert(v, labels.classes[v], Origin::Initial).unwrap();
    }
    s
}

/// G(n, p) with weights drawn from `weights` (unit weights when `None`).
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64, weights: Option<(f64, f64)>) -> Graph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen::<f64>() < p {
                let w = weights.map_or(1.0, |(lo, hi)| rng.gen_range(lo..hi));
                edges.push((a, b, w));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

pub fn random_costs<R: Rng>(rng: &mut R, n: usize, k: usize) -> ClassMatrix {
    let mut m = ClassMatrix::zeros(n, k);
    for v in m.as_mut_slice() {
        *v = rng.gen_range(-2.0..2.0);
    }
    m
}

/// Each node becomes a benchmark of a random class with probability `p`.
pub fn random_benchmarks<R: Rng>(rng: &mut R, n: usize, k: usize, p: f64) -> BenchmarkSets {
    let mut s = BenchmarkSets::new(n, k);
    for i in 0..n {
        if rng.gen::<f64>() < p {
            s.insert(i, rng.gen_range(0..k), Origin::Initial).unwrap();
        }
    }
    s
}

/// Minimum binary energy over all labelings of the free nodes.
pub fn brute_force(g: &Graph, costs: &ClassMatrix, bench: &BenchmarkSets, tau: f64) -> f64 {
    let n = g.node_count();
    let k = costs.cols();
    let free: Vec<usize> = (0..n).filter(|&i| !bench.is_benchmark(i)).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| bench.class_of(i).unwrap_or(0)).collect();
    let mut best = f64::INFINITY;
    for code in 0..k.pow(free.len() as u32) {
        let mut c = code;
        for &i in &free {
            labels[i] = c % k;
            c /= k;
        }
        best = best.min(primal_energy(
            g,
            costs,
            &ClassMatrix::one_hot(&labels, k),
            tau,
        ));
    }
    best
}

/// Energy evaluated straight from the definition, independent of the crate.
pub fn energy_oracle(g: &Graph, costs: &ClassMatrix, psi: &ClassMatrix, tau: f64) -> f64 {
    let mut tv = 0.0;
    for e in g.edges() {
        for k in 0..psi.cols() {
            tv += e.weight * (psi.get(e.head, k) - psi.get(e.tail, k)).abs();
        }
    }
    let mut unary = 0.0;
    for i in 0..psi.rows() {
        for k in 0..psi.cols() {
            unary += costs.get(i, k) * psi.get(i, k);
        }
    }
    (1.0 - tau) * tv + tau * unary
}

fn bfs_dist(g: &Graph, s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    dist[s] = Some(0);
    let mut queue = VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        for &(u, _) in g.neighbors(v) {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Edge betweenness by explicit enumeration of every shortest path between
/// every unordered pair.
pub fn betweenness_oracle(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut total = vec![0.0; g.edge_count()];
    for s in 0..n {
        let ds = bfs_dist(g, s);
        for t in s + 1..n {
            let Some(dt) = ds[t] else { continue };
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![(s, Vec::new())];
            while let Some((v, used)) = stack.pop() {
                if v == t {
                    paths.push(used);
                    continue;
                }
                let dv = ds[v].unwrap();
                for &(u, e) in g.neighbors(v) {
                    if ds[u] == Some(dv + 1) && dv < dt {
                        let mut next = used.clone();
                        next.push(e);
                        stack.push((u, next));
                    }
                }
            }
            let mut hits: HashMap<usize, usize> = HashMap::new();
            for p in &paths {
                for &e in p {
                    *hits.entry(e).or_default() += 1;
                }
            }
            for (e, h) in hits {
                total[e] += h as f64 / paths.len() as f64;
            }
        }
    }
    total
}

/// Sum of hop distances over connected unordered pairs.
pub fn total_path_length(g: &Graph) -> f64 {
    let n = g.node_count();
    let mut sum = 0usize;
    for s in 0..n {
        let d = bfs_dist(g, s);
        sum += (s + 1..n).filter_map(|t| d[t]).sum::<usize>();
    }
    sum as f64
}

/// Coreness by definition: the largest k whose k-core (iterated removal of
/// nodes with fewer than k neighbours) still contains the node.
pub fn coreness_oracle(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let mut core = vec![0; n];
    for k in 1..=n {
        let mut alive = vec![true; n];
        loop {
            let doomed: Vec<usize> = (0..n)
                .filter(|&v| alive[v])
                .filter(|&v| g.neighbors(v).iter().filter(|&&(u, _)| alive[u]).count() < k)
                .collect();
            if doomed.is_empty() {
                break;
            }
            for v in doomed {
                alive[v] = false;
            }
        }
        if !alive.iter().any(|&a| a) {
            break;
        }
        for v in (0..n).filter(|&v| alive[v]) {
            core[v] = k;
        }
    }
    core
}

/// Gaussian clusters in 10 dimensions joined into a symmetrized 5-nearest
/// neighbour graph with heat-kernel weights. Returns `(edge text, label text)`
/// in the `i j w` and `i label` file formats.
pub fn synthetic_knn<R: Rng>(rng: &mut R, clusters: usize, per_cluster: usize) -> (String, String) {
    const DIM: usize = 10;
    const NN: usize = 5;
    let normal = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..DIM).map(|_| 3.0 * normal(rng)).collect())
        .collect();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_cluster {
            points.push(center.iter().map(|x| x + normal(rng)).collect::<Vec<f64>>());
            labels.push(c);
        }
    }
    let n = points.len();
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut pairs: HashMap<(usize, usize), f64> = HashMap::new();
    for i in 0..n {
        let mut near: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist2(&points[i], &points[j]), j))
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d, j) in &near[..NN] {
            pairs.insert((i.min(j), i.max(j)), d);
        }
    }
    let mut keys: Vec<(usize, usize)> = pairs.keys().copied().collect();
    keys.sort_unstable();
    let sigma2 = keys.iter().map(|k| pairs[k]).sum::<f64>() / keys.len() as f64;
    let mut edges = String::new();
    for (a, b) in keys {
        let w = (-pairs[&(a, b)] / sigma2).exp();
        let _ = writeln!(edges, "{a} {b} {w:.16e}");
    }
    let mut text = String::new();
    for (i, c) in labels.iter().enumerate() {
        let _ = writeln!(text, "{i} c{c}");
    }
    (edges, text)
}
