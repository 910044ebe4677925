//! Ambient potentials from discrete duals, the four-region partition, and
//! the signed texture distance / inter-sign ratio statistics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{dist2, BallIndex, WeightedCloud};
use crate::error::{Result, SotxError};
use crate::measures::{Discretized, Sign};
use crate::transport::{
    build_block_problem, Block, BlockPlan, CostSpec, DualPotentials, TransportMap, TransportProblem, TransportSolver,
};

const ARGMIN_TIE: f64 = 1e-12;

/// c-transform extensions of the discrete duals.
///
/// `phi_sigma(x) = min_j [C_{sigma, s(j)}(x, y_j) - psi_j]` over every
/// target, and `u^sigma(x) = |x|^2/2 - phi_sigma(x)` on the part of space
/// whose nearest source support point has sign `sigma` (`-inf` elsewhere).
/// Target-side quantities are symmetric.
#[derive(Debug, Clone)]
pub struct AmbientPotentials {
    pub problem: TransportProblem,
    pub duals: DualPotentials,
    phi: Vec<f64>,
    psi: Vec<f64>,
    source_index: [Option<BallIndex>; 2],
    target_index: [Option<BallIndex>; 2],
    /// Largest `phi_i - phi_sigma(x_i)` over source points (should be <= 0).
    pub tightening_violation: f64,
    /// Branches with no support points, reported as absent.
    pub absent: Vec<String>,
}

fn slot(s: Sign) -> usize {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

fn index_of(c: &WeightedCloud) -> Option<BallIndex> {
    (!c.is_empty()).then(|| BallIndex::new(c))
}

pub fn build_potentials(duals: &DualPotentials, p: &TransportProblem) -> AmbientPotentials {
    let mut absent = Vec::new();
    for (c, name) in [
        (&p.source_plus, "u+"),
        (&p.source_minus, "u-"),
        (&p.target_plus, "v+"),
        (&p.target_minus, "v-"),
    ] {
        if c.is_empty() {
            absent.push(name.to_string());
        }
    }
    let mut pot = AmbientPotentials {
        problem: p.clone(),
        duals: duals.clone(),
        phi: duals.phi_global(),
        psi: duals.psi_global(),
        source_index: [index_of(&p.source_plus), index_of(&p.source_minus)],
        target_index: [index_of(&p.target_plus), index_of(&p.target_minus)],
        tightening_violation: f64::NEG_INFINITY,
        absent,
    };
    let mut worst = f64::NEG_INFINITY;
    for i in 0..p.n_sources() {
        let (s, _) = p.source_sign(i);
        worst = worst.max(pot.phi[i] - pot.phi_sigma(s, p.source_point(i)));
    }
    pot.tightening_violation = worst;
    pot
}

impl AmbientPotentials {
    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    /// c-transform over targets for a source of sign `s`, with its argmin
    /// (global target index, smallest index among near-ties).
    pub fn phi_sigma_arg(&self, s: Sign, x: &[f64]) -> (f64, Option<usize>) {
        let p = &self.problem;
        let mut best = f64::INFINITY;
        let mut arg = None;
        for j in 0..p.n_targets() {
            let b = Block::new(s, p.target_sign(j).0);
            let v = p.cost.block_cost(b, x, p.target_point(j)) - self.psi[j];
            if v < best - ARGMIN_TIE * (1.0 + best.abs().min(1e300)) {
                best = v;
                arg = Some(j);
            }
        }
        (best, arg)
    }

    pub fn phi_sigma(&self, s: Sign, x: &[f64]) -> f64 {
        self.phi_sigma_arg(s, x).0
    }

    /// c-transform over sources for a target of sign `t`.
    pub fn psi_tau_arg(&self, t: Sign, y: &[f64]) -> (f64, Option<usize>) {
        let p = &self.problem;
        let mut best = f64::INFINITY;
        let mut arg = None;
        for i in 0..p.n_sources() {
            let b = Block::new(p.source_sign(i).0, t);
            let v = p.cost.block_cost(b, p.source_point(i), y) - self.phi[i];
            if v < best - ARGMIN_TIE * (1.0 + best.abs().min(1e300)) {
                best = v;
                arg = Some(i);
            }
        }
        (best, arg)
    }

    pub fn psi_tau(&self, t: Sign, y: &[f64]) -> f64 {
        self.psi_tau_arg(t, y).0
    }

    fn in_domain(index: &[Option<BallIndex>; 2], s: Sign, x: &[f64]) -> bool {
        let d = |k: usize| index[k].as_ref().and_then(|ix| ix.nearest(x)).map(|(_, d)| d);
        match (d(slot(s)), d(1 - slot(s))) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(a), Some(b)) => a <= b,
        }
    }

    /// `u^s(x)`, or `-inf` outside the sign-`s` source domain.
    pub fn u(&self, s: Sign, x: &[f64]) -> f64 {
        if !Self::in_domain(&self.source_index, s, x) {
            return f64::NEG_INFINITY;
        }
        0.5 * dist2(x, &vec![0.0; x.len()]) - self.phi_sigma(s, x)
    }

    /// `v^t(y)`, or `-inf` outside the sign-`t` target domain.
    pub fn v(&self, t: Sign, y: &[f64]) -> f64 {
        if !Self::in_domain(&self.target_index, t, y) {
            return f64::NEG_INFINITY;
        }
        0.5 * dist2(y, &vec![0.0; y.len()]) - self.psi_tau(t, y)
    }

    /// `phi = max(u+, u-)`.
    pub fn phi_ambient(&self, x: &[f64]) -> f64 {
        self.u(Sign::Plus, x).max(self.u(Sign::Minus, x))
    }

    /// `psi = max(v+, v-)`.
    pub fn psi_ambient(&self, y: &[f64]) -> f64 {
        self.v(Sign::Plus, y).max(self.v(Sign::Minus, y))
    }

    /// Active source branch at `x`.
    pub fn active_sign(&self, x: &[f64]) -> Option<Sign> {
        let (a, b) = (self.u(Sign::Plus, x), self.u(Sign::Minus, x));
        if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
            None
        } else if a >= b {
            Some(Sign::Plus)
        } else {
            Some(Sign::Minus)
        }
    }

    /// Gradient map `grad phi(x)`: the c-transform minimizer on the active
    /// branch.
    pub fn grad_phi(&self, x: &[f64]) -> Option<Vec<f64>> {
        let s = self.active_sign(x)?;
        let (_, j) = self.phi_sigma_arg(s, x);
        j.map(|j| self.problem.target_point(j).to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionParams {
    pub delta: f64,
    /// Defaults to `delta * 1e-3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_tolerance: Option<f64>,
}

impl Default for PartitionParams {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            tie_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "PP")]
    PP,
    #[serde(rename = "MM")]
    MM,
    #[serde(rename = "PM")]
    PM,
    #[serde(rename = "MP")]
    MP,
    #[serde(rename = "UNASSIGNED")]
    Unassigned,
}

impl Region {
    pub fn from_block(b: Block) -> Region {
        match b {
            Block::PP => Region::PP,
            Block::MM => Region::MM,
            Block::PM => Region::PM,
            Block::MP => Region::MP,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::PP => "PP",
            Region::MM => "MM",
            Region::PM => "PM",
            Region::MP => "MP",
            Region::Unassigned => "UNASSIGNED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionLabels {
    /// Label per global source index.
    pub labels: Vec<Region>,
    pub masses: BTreeMap<Region, f64>,
    pub unassigned_mass: f64,
    /// Mass whose label differs from the plan's dominant block.
    pub disagreement_mass: f64,
    pub total_mass: f64,
    pub delta: f64,
}

/// `Some(Plus)` if `a > b + delta`, `Some(Minus)` if `b > a + delta`, `None`
/// inside the band (widened by the tie tolerance).
fn decide(a: f64, b: f64, delta: f64, tie: f64) -> Option<Sign> {
    let band = delta + tie;
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return None;
    }
    if b == f64::NEG_INFINITY || a - b > band {
        Some(Sign::Plus)
    } else if a == f64::NEG_INFINITY || b - a > band {
        Some(Sign::Minus)
    } else {
        None
    }
}

/// Labels each source point by the strict inequalities on `u±` at the point
/// and `v±` at its realized image `T(x)`.
pub fn assign_regions(pot: &AmbientPotentials, map: &TransportMap, params: &PartitionParams) -> Result<PartitionLabels> {
    if !(params.delta > 0.0) {
        return Err(SotxError::Invalid(format!("partition delta {} must be positive", params.delta)));
    }
    let p = &pot.problem;
    let n = p.n_sources();
    if map.entries.len() != n {
        return Err(SotxError::Invalid("map and potentials come from different problems".into()));
    }
    let tie = params.tie_tolerance.unwrap_or(params.delta * 1e-3);
    let weights = p.source_weights();
    let labels: Vec<Region> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = p.source_point(i);
            let entry = &map.entries[i];
            if entry.block.is_none() {
                return Region::Unassigned;
            }
            let y = &entry.image;
            let src = decide(pot.u(Sign::Plus, x), pot.u(Sign::Minus, x), params.delta, tie);
            let tgt = decide(pot.v(Sign::Plus, y), pot.v(Sign::Minus, y), params.delta, tie);
            match (src, tgt) {
                (Some(s), Some(t)) => Region::from_block(Block::new(s, t)),
                _ => Region::Unassigned,
            }
        })
        .collect();
    let mut masses: BTreeMap<Region, f64> = [Region::PP, Region::MM, Region::PM, Region::MP, Region::Unassigned]
        .into_iter()
        .map(|r| (r, 0.0))
        .collect();
    let mut disagreement = 0.0;
    for (i, r) in labels.iter().enumerate() {
        *masses.get_mut(r).expect("all regions present") += weights[i];
        let planned = map.entries[i].block.map(Region::from_block);
        if planned != Some(*r) {
            disagreement += weights[i];
        }
    }
    Ok(PartitionLabels {
        unassigned_mass: masses[&Region::Unassigned],
        labels,
        masses,
        disagreement_mass: disagreement,
        total_mass: weights.iter().sum(),
        delta: params.delta,
    })
}

/// `d_ST`: intra-block c-mass plus inter-block Λ̃-mass of the plan.
pub fn signed_texture_distance(plan: &BlockPlan, p: &TransportProblem) -> f64 {
    let mut intra = 0.0;
    let mut inter = 0.0;
    for (b, i, j, m) in plan.global_entries(p) {
        let c = p.cost.block_cost(b, p.source_point(i), p.target_point(j));
        if b.is_inter() {
            inter += m * c;
        } else {
            intra += m * c;
        }
    }
    intra + inter
}

/// `R = (mass(pi+-) + mass(pi-+)) / total mass`.
pub fn inter_sign_ratio(plan: &BlockPlan) -> Result<f64> {
    let total = plan.total_mass();
    if !(total > 0.0) {
        return Err(SotxError::Invalid("inter-sign ratio undefined for zero mass".into()));
    }
    // adding 0.0 turns a -0.0 into 0.0
    Ok((plan.inter_mass() / total).clamp(0.0, 1.0) + 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    /// Start index of the later window of the pair.
    pub t: usize,
    pub r: Option<f64>,
    pub d_st: Option<f64>,
}

/// Atoms at `(k / window, value)` for the nonzero values of one window.
fn window_measure(values: &[f64]) -> Discretized {
    let w = values.len() as f64;
    let mut plus = (Vec::new(), Vec::new());
    let mut minus = (Vec::new(), Vec::new());
    for (k, &v) in values.iter().enumerate() {
        let side = if v > 0.0 {
            &mut plus
        } else if v < 0.0 {
            &mut minus
        } else {
            continue;
        };
        side.0.extend_from_slice(&[k as f64 / w, v]);
        side.1.push(v.abs());
    }
    Discretized {
        plus: WeightedCloud::new(2, plus.0, plus.1).expect("finite window"),
        minus: WeightedCloud::new(2, minus.0, minus.1).expect("finite window"),
        under_resolved: false,
    }
}

/// Solves consecutive window pairs of a 1D series. Each window becomes a
/// signed atomic measure on the time-value plane; the later window is
/// rescaled to the earlier one's total variation.
pub fn regime_scan(series: &[f64], window: usize, stride: usize, cost: &CostSpec, solver: &dyn TransportSolver) -> Result<Vec<ScanRow>> {
    if window < 4 {
        return Err(SotxError::Invalid(format!("window {window} must be at least 4")));
    }
    if stride == 0 {
        return Err(SotxError::Invalid("stride must be positive".into()));
    }
    if series.len() < 2 * window {
        return Err(SotxError::Invalid(format!(
            "series of length {} shorter than two windows of {window}",
            series.len()
        )));
    }
    if let Some(v) = series.iter().find(|v| !v.is_finite()) {
        return Err(SotxError::Invalid(format!("non-finite series value {v}")));
    }
    let steps = (series.len() - window) / stride;
    (0..steps)
        .into_par_iter()
        .map(|k| {
            let a = &series[k * stride..k * stride + window];
            let b = &series[(k + 1) * stride..(k + 1) * stride + window];
            let t = (k + 1) * stride;
            let mu = window_measure(a);
            let mut nu = window_measure(b);
            let (ma, mb) = (mu.plus.mass() + mu.minus.mass(), nu.plus.mass() + nu.minus.mass());
            if !(ma > 0.0 && mb > 0.0) {
                return Ok(ScanRow { t, r: None, d_st: None });
            }
            nu.plus = nu.plus.scaled(ma / mb);
            nu.minus = nu.minus.scaled(ma / mb);
            let p = build_block_problem(&mu, &nu, cost)?;
            let (plan, _) = solver.solve(&p)?;
            Ok(ScanRow {
                t,
                r: Some(inter_sign_ratio(&plan)?),
                d_st: Some(signed_texture_distance(&plan, &p)),
            })
        })
        .collect()
}
