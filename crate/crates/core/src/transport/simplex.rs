//! Primal network simplex for the transportation problem on the complete
//! bipartite graph of concatenated sources and targets.
//!
//! The initial basis hangs every node off an artificial root, with supply
//! arcs pointing up and demand arcs pointing down, which makes it strongly
//! feasible. The leaving-arc rule keeps it that way, so degenerate pivots
//! cannot cycle.

use std::collections::HashMap;

use super::plan::{BlockPlan, DualPotentials, SolverMeta};
use super::problem::TransportProblem;
use crate::error::{Result, SotxError};

/// Default cap on the total number of source and target points.
pub const DEFAULT_CAP: usize = 20_000;

const DENSE_COST_LIMIT: usize = 16_000_000;

struct Network<'a> {
    p: &'a TransportProblem,
    n: usize,
    m: usize,
    root: usize,
    dense: Option<Vec<f64>>,
    art_up: Vec<bool>,
    art_cost: f64,
    adj: Vec<Vec<(usize, usize)>>,
    flow: HashMap<usize, f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    next_arc: usize,
    block_size: usize,
    eps: f64,
}

impl<'a> Network<'a> {
    fn new(p: &'a TransportProblem) -> Self {
        let n = p.n_sources();
        let m = p.n_targets();
        let nodes = n + m;
        let dense = (n * m <= DENSE_COST_LIMIT).then(|| p.cost_matrix());
        let max_cost = match &dense {
            Some(c) => c.iter().cloned().fold(0.0, f64::max),
            None => {
                let mut mx: f64 = 0.0;
                for i in 0..n {
                    for j in 0..m {
                        mx = mx.max(p.cost(i, j));
                    }
                }
                mx
            }
        };
        let art_cost = (max_cost + 1.0) * nodes as f64;
        let mut supply = p.source_weights();
        supply.extend(p.target_weights().into_iter().map(|w| -w));
        let root = nodes;
        let art_up: Vec<bool> = supply.iter().map(|s| *s >= 0.0).collect();
        let mut adj = vec![Vec::new(); nodes + 1];
        let mut flow = HashMap::with_capacity(2 * nodes);
        for u in 0..nodes {
            let a = n * m + u;
            adj[u].push((root, a));
            adj[root].push((u, a));
            flow.insert(a, supply[u].abs());
        }
        let arcs = (n * m).max(1);
        let mut net = Self {
            p,
            n,
            m,
            root,
            dense,
            art_up,
            art_cost,
            adj,
            flow,
            parent: vec![usize::MAX; nodes + 1],
            pred: vec![usize::MAX; nodes + 1],
            up: vec![false; nodes + 1],
            depth: vec![0; nodes + 1],
            pi: vec![0.0; nodes + 1],
            next_arc: 0,
            block_size: ((arcs as f64).sqrt() as usize).max(10),
            eps: (1e-11 * max_cost).max(4.0 * art_cost * f64::EPSILON),
        };
        net.rebuild();
        net
    }

    #[inline]
    fn ends(&self, a: usize) -> (usize, usize) {
        let real = self.n * self.m;
        if a < real {
            (a / self.m, self.n + a % self.m)
        } else {
            let u = a - real;
            if self.art_up[u] {
                (u, self.root)
            } else {
                (self.root, u)
            }
        }
    }

    #[inline]
    fn cost(&self, a: usize) -> f64 {
        let real = self.n * self.m;
        if a < real {
            match &self.dense {
                Some(c) => c[a],
                None => self.p.cost(a / self.m, a % self.m),
            }
        } else if self.art_up[a - real] {
            0.0
        } else {
            self.art_cost
        }
    }

    /// Recomputes parents, depths and potentials by a traversal from the root.
    fn rebuild(&mut self) {
        let mut stack = vec![self.root];
        self.parent[self.root] = usize::MAX;
        self.depth[self.root] = 0;
        self.pi[self.root] = 0.0;
        while let Some(u) = stack.pop() {
            for k in 0..self.adj[u].len() {
                let (v, a) = self.adj[u][k];
                if v == self.parent[u] && a == self.pred[u] {
                    continue;
                }
                self.parent[v] = u;
                self.pred[v] = a;
                let (s, _) = self.ends(a);
                let c = self.cost(a);
                self.up[v] = s == v;
                self.pi[v] = if self.up[v] { self.pi[u] - c } else { self.pi[u] + c };
                self.depth[v] = self.depth[u] + 1;
                stack.push(v);
            }
        }
    }

    /// Block search pricing over the real arcs.
    fn entering(&mut self) -> Option<usize> {
        let total = self.n * self.m;
        if total == 0 {
            return None;
        }
        let mut best = None;
        let mut min = 0.0;
        let mut count = self.block_size;
        for k in 0..total {
            let a = (self.next_arc + k) % total;
            let (s, t) = self.ends(a);
            let rc = self.cost(a) + self.pi[s] - self.pi[t];
            if rc < min {
                min = rc;
                best = Some(a);
            }
            count -= 1;
            if count == 0 {
                if min < -self.eps {
                    self.next_arc = (a + 1) % total;
                    return best;
                }
                count = self.block_size;
            }
        }
        if min < -self.eps {
            self.next_arc = (best.expect("set with min") + 1) % total;
            return best;
        }
        None
    }

    fn pivot(&mut self, e: usize) -> Result<()> {
        let (s, t) = self.ends(e);
        let (mut u, mut v) = (s, t);
        while u != v {
            if self.depth[u] > self.depth[v] {
                u = self.parent[u];
            } else if self.depth[v] > self.depth[u] {
                v = self.parent[v];
            } else {
                u = self.parent[u];
                v = self.parent[v];
            }
        }
        let join = u;
        let mut delta = f64::INFINITY;
        let mut out = usize::MAX;
        let mut u = s;
        while u != join {
            if self.up[u] {
                let d = self.flow[&self.pred[u]];
                if d < delta {
                    delta = d;
                    out = u;
                }
            }
            u = self.parent[u];
        }
        let mut u = t;
        while u != join {
            if !self.up[u] {
                let d = self.flow[&self.pred[u]];
                if d <= delta {
                    delta = d;
                    out = u;
                }
            }
            u = self.parent[u];
        }
        if out == usize::MAX {
            return Err(SotxError::Internal("unbounded transportation cycle".into()));
        }
        if delta > 0.0 {
            for (start, sign) in [(s, -1.0), (t, 1.0)] {
                let mut u = start;
                while u != join {
                    let a = self.pred[u];
                    let step = if self.up[u] { sign * delta } else { -sign * delta };
                    let f = self.flow.get_mut(&a).expect("tree arc");
                    *f = (*f + step).max(0.0);
                    u = self.parent[u];
                }
            }
        }
        let leaving = self.pred[out];
        let other = self.parent[out];
        self.flow.remove(&leaving);
        self.adj[out].retain(|&(_, a)| a != leaving);
        self.adj[other].retain(|&(_, a)| a != leaving);
        self.adj[s].push((t, e));
        self.adj[t].push((s, e));
        self.flow.insert(e, delta);
        self.rebuild();
        Ok(())
    }
}

/// Exact solve of the block LP. Returns the optimal plan and duals tightened
/// by a double c-transform.
pub fn solve_exact(p: &TransportProblem, cap: usize) -> Result<(BlockPlan, DualPotentials)> {
    let (n, m) = (p.n_sources(), p.n_targets());
    if n + m > cap {
        return Err(SotxError::SizeCap { points: n + m, cap });
    }
    let total = p.total_mass();
    let mut net = Network::new(p);
    let max_pivots = 1000 * (n + m + 10) * (n + m + 10);
    let mut pivots = 0usize;
    while let Some(e) = net.entering() {
        net.pivot(e)?;
        pivots += 1;
        if pivots > max_pivots {
            return Err(SotxError::NotConverged {
                iterations: pivots,
                residual: f64::NAN,
            });
        }
    }
    let real = n * m;
    let artificial: f64 = net.flow.iter().filter(|(a, _)| **a >= real).map(|(_, f)| *f).sum();
    if artificial > 1e-9 * total.max(f64::MIN_POSITIVE) {
        return Err(SotxError::Internal(format!(
            "transportation problem infeasible: {artificial:.3e} mass left on artificial arcs"
        )));
    }
    let mut entries: Vec<(usize, usize, f64)> = net
        .flow
        .iter()
        .filter(|(a, f)| **a < real && **f > 1e-14 * total)
        .map(|(a, f)| (a / m, a % m, *f))
        .collect();
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let cost = |i: usize, j: usize| match &net.dense {
        Some(c) => c[i * m + j],
        None => p.cost(i, j),
    };
    let mut phi: Vec<f64> = (0..n).map(|i| -net.pi[i]).collect();
    let mut psi: Vec<f64> = (0..m).map(|j| net.pi[n + j]).collect();
    if n > 0 && m > 0 {
        for (j, v) in psi.iter_mut().enumerate() {
            *v = (0..n).map(|i| cost(i, j) - phi[i]).fold(f64::INFINITY, f64::min);
        }
        for (i, v) in phi.iter_mut().enumerate() {
            *v = (0..m).map(|j| cost(i, j) - psi[j]).fold(f64::INFINITY, f64::min);
        }
        let (lo, hi) = phi.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        let shift = 0.5 * (lo + hi);
        phi.iter_mut().for_each(|v| *v -= shift);
        psi.iter_mut().for_each(|v| *v += shift);
    }

    let meta = SolverMeta {
        kind: "exact".into(),
        iterations: pivots,
        epsilon: None,
        bias_bound: None,
        marginal_error: 0.0,
    };
    let mut plan = BlockPlan::from_global(p, entries, meta);
    let marg = plan.marginals(p);
    plan.solver.marginal_error = marg.row_error.max(marg.column_error);
    let duals = DualPotentials::from_global(p, &phi, &psi);
    Ok((plan, duals))
}
