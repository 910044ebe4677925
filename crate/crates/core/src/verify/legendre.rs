use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::partition::{build_potentials, AmbientPotentials};
use crate::transport::{DualPotentials, TransportProblem};

/// Relative tolerance of the double Legendre residual.
pub const LEGENDRE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreReport {
    pub source_max: f64,
    pub source_mean: f64,
    pub target_max: f64,
    pub target_mean: f64,
    /// `1 + max |phi|, |psi|` over the discrete duals.
    pub scale: f64,
    pub worst_source: Option<usize>,
    pub worst_target: Option<usize>,
    /// `E(phi, psi) = sum phi dmu + sum psi dnu`.
    pub dual_objective: f64,
    pub pass: bool,
}

impl LegendreReport {
    pub fn max_residual(&self) -> f64 {
        self.source_max.max(self.target_max)
    }
}

fn summarize(r: &[f64]) -> (f64, f64, Option<usize>) {
    let mut worst = None;
    let mut max = 0.0;
    for (i, &v) in r.iter().enumerate() {
        if v > max {
            max = v;
            worst = Some(i);
        }
    }
    let mean = if r.is_empty() { 0.0 } else { r.iter().sum::<f64>() / r.len() as f64 };
    (max, mean, worst)
}

/// Evaluates both sup-transforms of the double Legendre system at every
/// sample. At a source `x` of sign `s`,
/// `u^s(x) = max( sup_{same sign} [x.y - v(y)], sup_{other sign} [x.y - v(y) - lambda(x, y)] )`,
/// which is the c-transform identity `phi_i = min_j [C(x_i, y_j) - psi_j]`.
/// Targets are symmetric.
pub fn legendre_system_residual(pot: &AmbientPotentials) -> LegendreReport {
    let p = &pot.problem;
    let phi = pot.duals.phi_global();
    let psi = pot.duals.psi_global();
    let src: Vec<f64> = (0..p.n_sources())
        .into_par_iter()
        .map(|i| (phi[i] - pot.phi_sigma(p.source_sign(i).0, p.source_point(i))).abs())
        .collect();
    let tgt: Vec<f64> = (0..p.n_targets())
        .into_par_iter()
        .map(|j| (psi[j] - pot.psi_tau(p.target_sign(j).0, p.target_point(j))).abs())
        .collect();
    let scale = 1.0 + phi.iter().chain(&psi).fold(0.0f64, |m, v| m.max(v.abs()));
    let (source_max, source_mean, worst_source) = summarize(&src);
    let (target_max, target_mean, worst_target) = summarize(&tgt);
    LegendreReport {
        source_max,
        source_mean,
        target_max,
        target_mean,
        scale,
        worst_source,
        worst_target,
        dual_objective: pot.duals.objective(p),
        pass: source_max.max(target_max) <= LEGENDRE_TOL * scale,
    }
}

/// Alternates `psi <- phi^c`, `phi <- psi^c` from the given duals and
/// returns the final pair with the sup-norm change per sweep. Optimal
/// duals are a fixed point after one sweep.
pub fn legendre_iterate(duals: &DualPotentials, p: &TransportProblem, sweeps: usize) -> (DualPotentials, Vec<f64>) {
    let mut phi = duals.phi_global();
    let mut psi = duals.psi_global();
    let mut changes = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        let new_psi: Vec<f64> = (0..p.n_targets())
            .into_par_iter()
            .map(|j| (0..p.n_sources()).map(|i| p.cost(i, j) - phi[i]).fold(f64::INFINITY, f64::min))
            .collect();
        let new_phi: Vec<f64> = (0..p.n_sources())
            .into_par_iter()
            .map(|i| (0..p.n_targets()).map(|j| p.cost(i, j) - new_psi[j]).fold(f64::INFINITY, f64::min))
            .collect();
        let change = phi
            .iter()
            .zip(&new_phi)
            .chain(psi.iter().zip(&new_psi))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        phi = new_phi;
        psi = new_psi;
        changes.push(change);
    }
    (DualPotentials::from_global(p, &phi, &psi), changes)
}

/// Rebuilds the potentials after adding `amount` to one target dual.
pub fn perturb_target_dual(pot: &AmbientPotentials, j: usize, amount: f64) -> AmbientPotentials {
    let mut duals = pot.duals.clone();
    let current = duals.psi(&pot.problem, j);
    duals.set_psi(&pot.problem, j, current + amount);
    build_potentials(&duals, &pot.problem)
}
