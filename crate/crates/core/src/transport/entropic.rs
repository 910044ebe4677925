//! Log-domain Sinkhorn scaling on the assembled block cost, with
//! epsilon-scaling from the cost range down to the target epsilon.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{BlockPlan, DualPotentials, SolverMeta};
use super::problem::TransportProblem;
use crate::error::{Result, SotxError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropicOptions {
    pub epsilon: f64,
    /// Stop once the relative L1 row-marginal error drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EntropicOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            tolerance: 1e-7,
            max_iterations: 200_000,
        }
    }
}

#[inline]
fn log_sum_exp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + vals.map(|v| (v - mx).exp()).sum::<f64>().ln()
}

struct State<'a> {
    c: &'a [f64],
    ct: Vec<f64>,
    n: usize,
    m: usize,
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl State<'_> {
    fn update_f(&mut self, eps: f64) {
        let (c, g, m) = (self.c, &self.g, self.m);
        let log_a = &self.log_a;
        self.f.par_iter_mut().enumerate().for_each(|(i, fi)| {
            let row = &c[i * m..(i + 1) * m];
            *fi = eps * log_a[i] - eps * log_sum_exp(row.iter().zip(g).map(|(cij, gj)| (gj - cij) / eps));
        });
    }

    fn update_g(&mut self, eps: f64) {
        let (ct, f, n) = (&self.ct, &self.f, self.n);
        let log_b = &self.log_b;
        self.g.par_iter_mut().enumerate().for_each(|(j, gj)| {
            let col = &ct[j * n..(j + 1) * n];
            *gj = eps * log_b[j] - eps * log_sum_exp(col.iter().zip(f).map(|(cij, fi)| (fi - cij) / eps));
        });
    }

    /// Relative L1 error of the row marginals.
    fn row_error(&self, eps: f64, a: &[f64], total: f64) -> f64 {
        let (c, g, m) = (self.c, &self.g, self.m);
        let rows: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &c[i * m..(i + 1) * m];
                row.iter().zip(g).map(|(cij, gj)| ((self.f[i] + gj - cij) / eps).exp()).sum()
            })
            .collect();
        rows.iter().zip(a).map(|(r, w)| (r - w).abs()).sum::<f64>() / total
    }
}

/// Entropic solve. The plan is dense up to entries below `1e-15` of the
/// total mass. Duals are `psi = g` and `phi` its c-transform, so they are
/// feasible and the duality gap is nonnegative.
pub fn solve_entropic(p: &TransportProblem, opts: &EntropicOptions) -> Result<(BlockPlan, DualPotentials)> {
    if !(opts.epsilon > 0.0) {
        return Err(SotxError::Invalid(format!("entropic epsilon {} must be positive", opts.epsilon)));
    }
    let (n, m) = (p.n_sources(), p.n_targets());
    let total = p.total_mass();
    let meta = |iterations, err| SolverMeta {
        kind: "entropic".into(),
        iterations,
        epsilon: Some(opts.epsilon),
        bias_bound: Some(opts.epsilon * ((n * m).max(1) as f64).ln() * total),
        marginal_error: err,
    };
    if n == 0 || m == 0 || total == 0.0 {
        return Ok((
            BlockPlan::from_global(p, std::iter::empty(), meta(0, 0.0)),
            DualPotentials::from_global(p, &vec![0.0; n], &vec![0.0; m]),
        ));
    }
    let a = p.source_weights();
    let b = p.target_weights();
    let c = p.cost_matrix();
    let mut ct = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            ct[j * n + i] = c[i * m + j];
        }
    }
    let cmax = c.iter().cloned().fold(0.0, f64::max);
    let mut st = State {
        c: &c,
        ct,
        n,
        m,
        log_a: a.iter().map(|w| w.ln()).collect(),
        log_b: b.iter().map(|w| w.ln()).collect(),
        f: vec![0.0; n],
        g: vec![0.0; m],
    };

    let mut iterations = 0;
    let mut eps = cmax.max(opts.epsilon);
    loop {
        let last = eps <= opts.epsilon;
        let stage_cap = if last { opts.max_iterations } else { 200 };
        let stage_tol = if last { opts.tolerance } else { 1e-3 };
        let mut err = f64::INFINITY;
        for k in 0..stage_cap {
            st.update_f(eps);
            st.update_g(eps);
            iterations += 1;
            if k % 10 == 9 || k + 1 == stage_cap {
                err = st.row_error(eps, &a, total);
                if err < stage_tol {
                    break;
                }
            }
        }
        if last {
            if !(err < opts.tolerance) {
                return Err(SotxError::NotConverged {
                    iterations,
                    residual: err,
                });
            }
            let mut entries = Vec::new();
            for i in 0..n {
                for j in 0..m {
                    let mass = ((st.f[i] + st.g[j] - c[i * m + j]) / eps).exp();
                    if mass > 1e-15 * total {
                        entries.push((i, j, mass));
                    }
                }
            }
            let psi = st.g.clone();
            let phi: Vec<f64> = (0..n)
                .map(|i| (0..m).map(|j| c[i * m + j] - psi[j]).fold(f64::INFINITY, f64::min))
                .collect();
            let plan = BlockPlan::from_global(p, entries, meta(iterations, err));
            return Ok((plan, DualPotentials::from_global(p, &phi, &psi)));
        }
        eps = (eps * 0.5).max(opts.epsilon);
    }
}
