use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cost::Block;
use super::problem::TransportProblem;
use crate::measures::Sign;

/// Which solver produced a plan and how it terminated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub kind: String,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Upper bound on the entropic bias of the objective.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias_bound: Option<f64>,
    pub marginal_error: f64,
}

/// Four sparse coupling tables keyed by block, with local indices into the
/// block's source and target clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub blocks: BTreeMap<Block, Vec<(usize, usize, f64)>>,
    pub objective: f64,
    pub solver: SolverMeta,
}

/// Linked-marginal errors of a plan, relative to the total mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub row_error: f64,
    pub column_error: f64,
    /// `|mass(pi+-) - mass(pi-+)|` relative.
    pub inter_imbalance: f64,
    pub min_mass: f64,
}

impl BlockPlan {
    /// Builds a plan from `(global source, global target, mass)` triples.
    pub fn from_global(p: &TransportProblem, entries: impl IntoIterator<Item = (usize, usize, f64)>, solver: SolverMeta) -> Self {
        let mut blocks: BTreeMap<Block, Vec<(usize, usize, f64)>> = Block::ALL.iter().map(|b| (*b, Vec::new())).collect();
        let mut objective = 0.0;
        for (i, j, m) in entries {
            let (si, li) = p.source_sign(i);
            let (sj, lj) = p.target_sign(j);
            objective += m * p.cost(i, j);
            blocks.get_mut(&Block::new(si, sj)).expect("all blocks present").push((li, lj, m));
        }
        for v in blocks.values_mut() {
            v.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        }
        Self {
            blocks,
            objective,
            solver,
        }
    }

    pub fn block(&self, b: Block) -> &[(usize, usize, f64)] {
        self.blocks.get(&b).map_or(&[], Vec::as_slice)
    }

    pub fn block_mass(&self, b: Block) -> f64 {
        self.block(b).iter().map(|e| e.2).sum()
    }

    pub fn total_mass(&self) -> f64 {
        Block::ALL.iter().map(|b| self.block_mass(*b)).sum()
    }

    /// `mass(pi+-) + mass(pi-+)`.
    pub fn inter_mass(&self) -> f64 {
        self.block_mass(Block::PM) + self.block_mass(Block::MP)
    }

    /// All entries as `(block, global source, global target, mass)`.
    pub fn global_entries<'a>(&'a self, p: &'a TransportProblem) -> impl Iterator<Item = (Block, usize, usize, f64)> + 'a {
        Block::ALL.into_iter().flat_map(move |b| {
            self.block(b).iter().map(move |&(i, j, m)| {
                (b, p.source_global(b.source(), i), p.target_global(b.target(), j), m)
            })
        })
    }

    /// Recomputes the objective from the entries.
    pub fn evaluate(&self, p: &TransportProblem) -> f64 {
        self.global_entries(p).map(|(_, i, j, m)| m * p.cost(i, j)).sum()
    }

    pub fn marginals(&self, p: &TransportProblem) -> MarginalReport {
        let mut rows = vec![0.0; p.n_sources()];
        let mut cols = vec![0.0; p.n_targets()];
        let mut min_mass = f64::INFINITY;
        for (_, i, j, m) in self.global_entries(p) {
            rows[i] += m;
            cols[j] += m;
            min_mass = min_mass.min(m);
        }
        let total = p.total_mass().max(f64::MIN_POSITIVE);
        let err = |got: &[f64], want: Vec<f64>| got.iter().zip(want).map(|(g, w)| (g - w).abs()).sum::<f64>() / total;
        MarginalReport {
            row_error: err(&rows, p.source_weights()),
            column_error: err(&cols, p.target_weights()),
            inter_imbalance: (self.block_mass(Block::PM) - self.block_mass(Block::MP)).abs() / total,
            min_mass: if min_mass.is_finite() { min_mass } else { 0.0 },
        }
    }
}

/// Discrete duals on the source and target points of each sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub phi_plus: Vec<f64>,
    pub phi_minus: Vec<f64>,
    pub psi_plus: Vec<f64>,
    pub psi_minus: Vec<f64>,
    /// Largest constraint violation `phi + psi - cost` per block.
    pub slack: BTreeMap<Block, f64>,
}

impl DualPotentials {
    /// Splits concatenated duals and records the feasibility slack.
    pub fn from_global(p: &TransportProblem, phi: &[f64], psi: &[f64]) -> Self {
        let np = p.source_plus.len();
        let mp = p.target_plus.len();
        let mut d = Self {
            phi_plus: phi[..np].to_vec(),
            phi_minus: phi[np..].to_vec(),
            psi_plus: psi[..mp].to_vec(),
            psi_minus: psi[mp..].to_vec(),
            slack: BTreeMap::new(),
        };
        d.slack = d.violations(p);
        d
    }

    pub fn phi(&self, p: &TransportProblem, i: usize) -> f64 {
        match p.source_sign(i) {
            (Sign::Plus, k) => self.phi_plus[k],
            (Sign::Minus, k) => self.phi_minus[k],
        }
    }

    pub fn psi(&self, p: &TransportProblem, j: usize) -> f64 {
        match p.target_sign(j) {
            (Sign::Plus, k) => self.psi_plus[k],
            (Sign::Minus, k) => self.psi_minus[k],
        }
    }

    pub fn phi_global(&self) -> Vec<f64> {
        let mut v = self.phi_plus.clone();
        v.extend_from_slice(&self.phi_minus);
        v
    }

    pub fn psi_global(&self) -> Vec<f64> {
        let mut v = self.psi_plus.clone();
        v.extend_from_slice(&self.psi_minus);
        v
    }

    pub fn set_psi(&mut self, p: &TransportProblem, j: usize, value: f64) {
        match p.target_sign(j) {
            (Sign::Plus, k) => self.psi_plus[k] = value,
            (Sign::Minus, k) => self.psi_minus[k] = value,
        }
    }

    /// `max(phi_i + psi_j - C_ij)` over each block, floored at zero.
    pub fn violations(&self, p: &TransportProblem) -> BTreeMap<Block, f64> {
        let mut out: BTreeMap<Block, f64> = Block::ALL.iter().map(|b| (*b, 0.0)).collect();
        for i in 0..p.n_sources() {
            let fi = self.phi(p, i);
            for j in 0..p.n_targets() {
                let v = fi + self.psi(p, j) - p.cost(i, j);
                let e = out.get_mut(&p.block_of(i, j)).expect("all blocks present");
                *e = e.max(v);
            }
        }
        out
    }

    pub fn max_violation(&self) -> f64 {
        self.slack.values().cloned().fold(0.0, f64::max)
    }

    /// `sum phi dmu + sum psi dnu`.
    pub fn objective(&self, p: &TransportProblem) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        dot(&self.phi_plus, &p.source_plus.weights)
            + dot(&self.phi_minus, &p.source_minus.weights)
            + dot(&self.psi_plus, &p.target_plus.weights)
            + dot(&self.psi_minus, &p.target_minus.weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    /// `gap / (1 + |primal|)`.
    pub relative: f64,
    pub max_violation: f64,
    pub feasible: bool,
}

/// Primal minus dual objective. Dual infeasibility beyond `1e-9` relative
/// is reported but does not stop the computation.
pub fn duality_gap(plan: &BlockPlan, duals: &DualPotentials, p: &TransportProblem) -> GapReport {
    let primal = plan.evaluate(p);
    let dual = duals.objective(p);
    let viol = duals.violations(p).values().cloned().fold(0.0, f64::max);
    let gap = primal - dual;
    GapReport {
        primal,
        dual,
        gap,
        relative: gap / (1.0 + primal.abs()),
        max_violation: viol,
        feasible: viol <= 1e-9 * (1.0 + primal.abs()),
    }
}

/// Largest `|C_ij - phi_i - psi_j|` over plan entries with positive mass.
pub fn complementary_slackness(plan: &BlockPlan, duals: &DualPotentials, p: &TransportProblem) -> f64 {
    plan.global_entries(p)
        .filter(|e| e.3 > 0.0)
        .map(|(_, i, j, _)| (p.cost(i, j) - duals.phi(p, i) - duals.psi(p, j)).abs())
        .fold(0.0, f64::max)
}
