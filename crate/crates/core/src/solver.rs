//! Augmented Lagrangian solver for the convex relaxed multi-class cut.
//!
//! Primal problem, with `psi` restricted to the simplex row-wise and the
//! benchmark rows fixed to their one-hot labels:
//!
//! ```text
//! min  (1 - tau) * sum_k sum_e w_e |psi_ik - psi_jk|  +  tau * sum_ik M_ik psi_ik
//! ```
//!
//! It is solved through its dual
//!
//! ```text
//! max  sum_i rs_i
//! s.t. div(q_k)_i - rs_i + rk_ik = 0,   |q_k(e)| <= (1 - tau) w_e,   rk_ik <= tau M_ik
//! ```
//!
//! where `psi` are the multipliers of the equality constraints. Each
//! iteration takes one projected gradient step on the flows `q`, maximizes
//! the augmented Lagrangian exactly in `rk` and `rs`, then updates `psi`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::{project_simplex, ClassMatrix};
use crate::region_force::BenchmarkSets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Weight of the region term; the cut term gets `1 - tau`.
    pub tau: f64,
    /// Augmentation penalty `c`.
    pub penalty: f64,
    /// Flow step size `s`. `None` uses `0.16 * c / max weighted degree`.
    pub step: Option<f64>,
    pub max_iters: usize,
    /// Stop once the mean absolute change of `psi` drops to this value.
    pub tol: f64,
    /// Convergence additionally requires the equality residual infinity
    /// norm on free rows to be at most this value.
    pub residual_tol: f64,
    /// Evaluate the primal energy, certified dual bound and bound violations
    /// at every iteration. Roughly doubles the cost of an iteration.
    pub audit: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: 0.5,
            penalty: 0.3,
            step: None,
            max_iters: 10_000,
            tol: 1e-5,
            residual_tol: 1e-3,
            audit: false,
        }
    }
}

impl SolverConfig {
    /// Validates the configuration against `g` and returns the step size.
    pub fn resolve_step(&self, g: &Graph) -> Result<f64> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::config(format!(
                "tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(Error::config(format!(
                "penalty must be positive, got {}",
                self.penalty
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.residual_tol.is_nan() || self.residual_tol <= 0.0 {
            return Err(Error::config(format!(
                "residual_tol must be positive, got {}",
                self.residual_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        let dmax = g.max_degree();
        let step = match self.step {
            Some(s) => s,
            None if dmax > 0.0 => 0.16 * self.penalty / dmax,
            None => 0.16 * self.penalty,
        };
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::config(format!("step must be positive, got {step}")));
        }
        let limit = self.penalty.min(0.5);
        if step * dmax > limit * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "step {step} times max degree {dmax} exceeds the stability limit {limit}"
            )));
        }
        Ok(step)
    }
}

/// Dual variables: per-class edge flows, bounded per-node variables and the
/// free per-node variable whose sum is the dual objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    /// `q[e][k]`, stored edge-major (`edge_count x K`).
    pub flows: ClassMatrix,
    /// `rk[i][k] <= tau M_ik`.
    pub bounded: ClassMatrix,
    /// `rs[i]`, unconstrained.
    pub free: Vec<f64>,
}

impl DualState {
    fn initial(g: &Graph, costs: &ClassMatrix, tau: f64) -> Self {
        let k = costs.cols();
        let mut bounded = costs.clone();
        for v in bounded.as_mut_slice() {
            *v = (tau * *v).min(0.0);
        }
        DualState {
            flows: ClassMatrix::zeros(g.edge_count(), k),
            bounded,
            free: vec![0.0; g.node_count()],
        }
    }

    /// `sum_i rs_i`.
    pub fn objective(&self) -> f64 {
        self.free.iter().sum()
    }

    /// Largest violation of the box constraints on `q` and upper bounds on `rk`.
    pub fn max_violation(&self, g: &Graph, costs: &ClassMatrix, tau: f64) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (e, edge) in g.edges().iter().enumerate() {
            let cap = (1.0 - tau) * edge.weight;
            for &q in self.flows.row(e) {
                worst = worst.max(q.abs() - cap);
            }
        }
        for (r, m) in self.bounded.as_slice().iter().zip(costs.as_slice()) {
            worst = worst.max(r - tau * m);
        }
        worst.max(0.0)
    }

    /// Divergence of every class flow, `n x K`.
    pub fn divergence(&self, g: &Graph) -> ClassMatrix {
        let mut div = ClassMatrix::zeros(g.node_count(), self.flows.cols());
        flow_divergence(g, &self.flows, &mut div);
        div
    }

    /// Objective of the feasible dual point obtained by keeping `q` and
    /// choosing the best `rs`, `rk` that satisfy the equality constraints:
    /// `sum_i min_k (tau M_ik + div(q_k)_i)`, with the minimum restricted to
    /// the own class on benchmark rows. This is a lower bound on the primal
    /// energy of every admissible `psi`.
    pub fn certified_bound(
        &self,
        g: &Graph,
        costs: &ClassMatrix,
        bench: &BenchmarkSets,
        tau: f64,
    ) -> f64 {
        let div = self.divergence(g);
        certified_bound_from_div(&div, costs, bench, tau)
    }
}

fn certified_bound_from_div(
    div: &ClassMatrix,
    costs: &ClassMatrix,
    bench: &BenchmarkSets,
    tau: f64,
) -> f64 {
    (0..div.rows())
        .map(|i| match bench.class_of(i) {
            Some(c) => tau * costs.get(i, c) + div.get(i, c),
            None => div
                .row(i)
                .iter()
                .zip(costs.row(i))
                .map(|(d, m)| tau * m + d)
                .fold(f64::INFINITY, f64::min),
        })
        .sum()
}

fn flow_divergence(g: &Graph, flows: &ClassMatrix, div: &mut ClassMatrix) {
    div.as_mut_slice().fill(0.0);
    for (e, edge) in g.edges().iter().enumerate() {
        let q = flows.row(e);
        for (k, &v) in q.iter().enumerate() {
            let head = div.get(edge.head, k);
            div.set(edge.head, k, head + v);
            let tail = div.get(edge.tail, k);
            div.set(edge.tail, k, tail - v);
        }
    }
}

/// Relaxed labels plus their rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionState {
    pub psi: ClassMatrix,
    pub labels: Vec<usize>,
    /// Residual infinity norm per iteration.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub dual_objective: f64,
    pub residual_inf: f64,
    pub psi_change: f64,
    /// Filled in audit mode only.
    pub primal_energy: Option<f64>,
    pub dual_bound: Option<f64>,
    pub max_violation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub step: f64,
    pub history: Vec<IterationRecord>,
    pub residual_inf: f64,
    pub dual_objective: f64,
    pub dual_bound: f64,
    /// Energy of `psi` projected onto the admissible set.
    pub primal_energy: f64,
    /// Energy of the rounded labelling.
    pub rounded_energy: f64,
    pub max_violation: f64,
}

impl Diagnostics {
    /// Per-iteration trace as CSV: `iter,dual_objective,residual_inf,psi_change`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,dual_objective,residual_inf,psi_change\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.iter,
                crate::fmt_sig(r.dual_objective),
                crate::fmt_sig(r.residual_inf),
                crate::fmt_sig(r.psi_change)
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub partition: PartitionState,
    pub dual: DualState,
    pub diagnostics: Diagnostics,
}

/// Energy of a class matrix under the relaxed model.
pub fn primal_energy(g: &Graph, costs: &ClassMatrix, psi: &ClassMatrix, tau: f64) -> f64 {
    let mut cut = 0.0;
    for e in g.edges() {
        let a = psi.row(e.tail);
        let b = psi.row(e.head);
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        cut += e.weight * diff;
    }
    let region: f64 = costs
        .as_slice()
        .iter()
        .zip(psi.as_slice())
        .map(|(m, p)| m * p)
        .sum();
    (1.0 - tau) * cut + tau * region
}

/// Per-row argmax; ties go to the lowest class index.
pub fn round(psi: &ClassMatrix) -> Vec<usize> {
    psi.iter_rows()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Projects free rows onto the simplex and pins benchmark rows.
pub fn admissible_projection(psi: &ClassMatrix, bench: &BenchmarkSets) -> ClassMatrix {
    let mut out = psi.clone();
    for i in 0..psi.rows() {
        let row = match bench.class_of(i) {
            Some(c) => {
                let mut r = vec![0.0; psi.cols()];
                r[c] = 1.0;
                r
            }
            None => project_simplex(psi.row(i)),
        };
        out.row_mut(i).copy_from_slice(&row);
    }
    out
}

/// Largest distance of a free row from the simplex, measured per entry and
/// on the row sum.
fn simplex_gap(psi: &ClassMatrix, bench: &BenchmarkSets) -> f64 {
    (0..psi.rows())
        .filter(|&i| !bench.is_benchmark(i))
        .map(|i| {
            let row = psi.row(i);
            let sum: f64 = row.iter().sum();
            row.iter()
                .map(|&x| (-x).max(x - 1.0))
                .fold((sum - 1.0).abs(), f64::max)
        })
        .fold(0.0, f64::max)
}

/// Maximizer of the augmented Lagrangian in `rs_i` for fixed flows, bounded
/// variables and multipliers of one node:
/// `(1 + c * sum_k (div_k + rk_k - psi_k / c)) / (c K)`.
pub fn free_variable(div: &[f64], bounded: &[f64], psi: &[f64], c: f64) -> f64 {
    let q_sum: f64 = div
        .iter()
        .zip(bounded)
        .zip(psi)
        .map(|((d, r), p)| d + r - p / c)
        .sum();
    (1.0 + c * q_sum) / (c * div.len() as f64)
}

fn ensure_finite(values: &[f64], update: &'static str, iter: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { update, iter })
    }
}

/// Runs the augmented Lagrangian iterations.
///
/// `init` warm-starts `psi`; otherwise the caller's class probabilities
/// should be passed so that the iteration starts from them. Hitting
/// `max_iters` is not an error: the result carries `converged = false`.
pub fn solve(
    g: &Graph,
    costs: &ClassMatrix,
    bench: &BenchmarkSets,
    cfg: &SolverConfig,
    init: &ClassMatrix,
) -> Result<Solution> {
    let n = g.node_count();
    let k = costs.cols();
    if costs.rows() != n {
        return Err(Error::DimensionMismatch {
            what: "unary costs",
            expected: n,
            found: costs.rows(),
        });
    }
    if init.rows() != n || init.cols() != k {
        return Err(Error::DimensionMismatch {
            what: "initial psi",
            expected: n * k,
            found: init.rows() * init.cols(),
        });
    }
    if bench.node_count() != n || bench.class_count() != k {
        return Err(Error::config("benchmark sets do not match the cost matrix"));
    }
    if k == 0 {
        return Err(Error::config("at least one class is required"));
    }
    if !costs.is_finite() {
        return Err(Error::config("unary costs must be finite"));
    }
    ensure_finite(init.as_slice(), "initial psi", 0)?;
    let step = cfg.resolve_step(g)?;
    let tau = cfg.tau;
    let c = cfg.penalty;

    let mut psi = init.clone();
    for i in 0..n {
        if let Some(cls) = bench.class_of(i) {
            let row = psi.row_mut(i);
            row.fill(0.0);
            row[cls] = 1.0;
        }
    }
    let mut dual = DualState::initial(g, costs, tau);

    if k == 1 {
        // The row-sum constraint leaves a single admissible point.
        psi.as_mut_slice().fill(1.0);
        for i in 0..n {
            let bound = tau * costs.get(i, 0);
            dual.bounded.set(i, 0, bound);
            dual.free[i] = bound;
        }
        return Ok(finish(
            g,
            costs,
            bench,
            cfg,
            step,
            psi,
            dual,
            Vec::new(),
            0,
            true,
        ));
    }

    let mut div = ClassMatrix::zeros(n, k);
    let mut resid = ClassMatrix::zeros(n, k);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let caps: Vec<f64> = g.edges().iter().map(|e| (1.0 - tau) * e.weight).collect();

    for iter in 1..=cfg.max_iters {
        iterations = iter;

        // residue R = div q - rs + rk - psi / c; benchmark rows carry no
        // equality constraint, only their fixed one-hot psi
        for i in 0..n {
            let rs = dual.free[i];
            let d = div.row(i);
            let rk = dual.bounded.row(i);
            let p = psi.row(i);
            let fixed = bench.is_benchmark(i);
            let out = resid.row_mut(i);
            for j in 0..k {
                out[j] = if fixed { 0.0 } else { d[j] - rs + rk[j] } - p[j] / c;
            }
        }

        // projected gradient step on the flows
        for (e, edge) in g.edges().iter().enumerate() {
            let scale = step * edge.weight;
            let cap = caps[e];
            let (rt, rh) = (resid.row(edge.tail), resid.row(edge.head));
            let q = dual.flows.row_mut(e);
            for j in 0..k {
                q[j] = (q[j] - scale * (rh[j] - rt[j])).clamp(-cap, cap);
            }
        }
        ensure_finite(dual.flows.as_slice(), "flow", iter)?;
        flow_divergence(g, &dual.flows, &mut div);

        // bounded variables, then the free variable in closed form
        for i in 0..n {
            let d = div.row(i);
            let m = costs.row(i);
            let p = psi.row(i);
            match bench.class_of(i) {
                Some(cls) => {
                    let rs = d[cls] + tau * m[cls];
                    dual.free[i] = rs;
                    let rk = dual.bounded.row_mut(i);
                    for j in 0..k {
                        rk[j] = if j == cls {
                            tau * m[j]
                        } else {
                            (rs - d[j]).min(tau * m[j])
                        };
                    }
                }
                None => {
                    let rs_prev = dual.free[i];
                    let rk = dual.bounded.row_mut(i);
                    for j in 0..k {
                        rk[j] = (p[j] / c + rs_prev - d[j]).min(tau * m[j]);
                    }
                    dual.free[i] = free_variable(d, rk, p, c);
                }
            }
        }
        ensure_finite(dual.bounded.as_slice(), "bounded dual", iter)?;
        ensure_finite(&dual.free, "free dual", iter)?;

        // multiplier update
        let mut change = 0.0;
        let mut res_inf: f64 = 0.0;
        for i in 0..n {
            if bench.is_benchmark(i) {
                continue;
            }
            let rs = dual.free[i];
            let d = div.row(i);
            let rk = dual.bounded.row(i);
            let p = psi.row_mut(i);
            for j in 0..k {
                let r = d[j] - rs + rk[j];
                let delta = c * r;
                p[j] -= delta;
                change += delta.abs();
                res_inf = res_inf.max(r.abs());
            }
        }
        ensure_finite(psi.as_slice(), "psi", iter)?;
        let change = change / (n * k) as f64;

        let mut record = IterationRecord {
            iter,
            dual_objective: dual.objective(),
            residual_inf: res_inf,
            psi_change: change,
            primal_energy: None,
            dual_bound: None,
            max_violation: None,
        };
        if cfg.audit {
            let projected = admissible_projection(&psi, bench);
            record.primal_energy = Some(primal_energy(g, costs, &projected, tau));
            record.dual_bound = Some(certified_bound_from_div(&div, costs, bench, tau));
            record.max_violation = Some(dual.max_violation(g, costs, tau));
        }
        history.push(record);

        if change <= cfg.tol
            && res_inf <= cfg.residual_tol
            && simplex_gap(&psi, bench) <= 10.0 * cfg.tol
        {
            converged = true;
            break;
        }
    }

    if !converged {
        log::warn!(
            "solver stopped at max_iters = {} without reaching tol = {}",
            cfg.max_iters,
            cfg.tol
        );
    }
    Ok(finish(
        g, costs, bench, cfg, step, psi, dual, history, iterations, converged,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    g: &Graph,
    costs: &ClassMatrix,
    bench: &BenchmarkSets,
    cfg: &SolverConfig,
    step: f64,
    psi: ClassMatrix,
    dual: DualState,
    history: Vec<IterationRecord>,
    iterations: usize,
    converged: bool,
) -> Solution {
    let tau = cfg.tau;
    let labels = round(&psi);
    let projected = admissible_projection(&psi, bench);
    let rounded = ClassMatrix::one_hot(&labels, psi.cols());
    let diagnostics = Diagnostics {
        iterations,
        converged,
        step,
        residual_inf: history.last().map_or(0.0, |r| r.residual_inf),
        dual_objective: dual.objective(),
        dual_bound: dual.certified_bound(g, costs, bench, tau),
        primal_energy: primal_energy(g, costs, &projected, tau),
        rounded_energy: primal_energy(g, costs, &rounded, tau),
        max_violation: dual.max_violation(g, costs, tau),
        history,
    };
    let residual_history = diagnostics.history.iter().map(|r| r.residual_inf).collect();
    Solution {
        partition: PartitionState {
            psi,
            labels,
            residual_history,
        },
        dual,
        diagnostics,
    }
}

/// `sum_i rs_i` of a dual state after checking its bounds to `1e-9`.
pub fn dual_objective(dual: &DualState, g: &Graph, costs: &ClassMatrix, tau: f64) -> Result<f64> {
    let v = dual.max_violation(g, costs, tau);
    if v > 1e-9 {
        return Err(Error::Invariant(format!("dual bounds violated by {v}")));
    }
    Ok(dual.objective())
}
