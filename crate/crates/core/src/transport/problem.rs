use crate::cloud::{BallIndex, WeightedCloud};
use crate::error::{Result, SotxError};
use crate::measures::{Discretized, Sign, MASS_BALANCE_TOL};

use super::cost::{Block, CostSpec};

/// Source clouds `mu+ ⊕ mu-` against target clouds `nu+ ⊕ nu-`.
///
/// Global source indices run over the plus cloud first, then the minus
/// cloud; targets likewise.
#[derive(Debug, Clone)]
pub struct TransportProblem {
    pub source_plus: WeightedCloud,
    pub source_minus: WeightedCloud,
    pub target_plus: WeightedCloud,
    pub target_minus: WeightedCloud,
    pub cost: CostSpec,
    /// `(mu+ - mu-) - (nu+ - nu-)` after balancing. Nonzero values force
    /// unequal inter-sign masses.
    pub signed_imbalance: f64,
}

/// Assembles the block problem. Total variations must agree to
/// `MASS_BALANCE_TOL` relative; targets are then rescaled to match exactly.
pub fn build_block_problem(mu: &Discretized, nu: &Discretized, cost: &CostSpec) -> Result<TransportProblem> {
    let dim = mu.plus.dim;
    for c in [&mu.minus, &nu.plus, &nu.minus] {
        if c.dim != dim {
            return Err(SotxError::DimensionMismatch { expected: dim, found: c.dim });
        }
    }
    let src = mu.plus.mass() + mu.minus.mass();
    let tgt = nu.plus.mass() + nu.minus.mass();
    let scale = src.max(tgt);
    let rel = if scale > 0.0 { (src - tgt).abs() / scale } else { 0.0 };
    if rel > MASS_BALANCE_TOL {
        return Err(SotxError::MassImbalance {
            source_mass: src,
            target_mass: tgt,
            relative: rel,
        });
    }
    for (d, what) in [(mu, "source"), (nu, "target")] {
        if d.plus.is_empty() || d.minus.is_empty() {
            continue;
        }
        let index = BallIndex::new(&d.minus);
        if let Some(p) = d.plus.points().find(|p| index.any_within(p, 0.0)) {
            return Err(SotxError::Invalid(format!(
                "{what} point {p:?} carries both signs; the block supports overlap"
            )));
        }
    }
    let factor = if tgt > 0.0 { src / tgt } else { 1.0 };
    let (target_plus, target_minus) = if factor == 1.0 {
        (nu.plus.clone(), nu.minus.clone())
    } else {
        (nu.plus.scaled(factor), nu.minus.scaled(factor))
    };
    let signed_imbalance = (mu.plus.mass() - mu.minus.mass()) - (target_plus.mass() - target_minus.mass());
    Ok(TransportProblem {
        source_plus: mu.plus.clone(),
        source_minus: mu.minus.clone(),
        target_plus,
        target_minus,
        cost: cost.clone(),
        signed_imbalance,
    })
}

impl TransportProblem {
    /// Convenience constructor from four clouds.
    pub fn from_clouds(
        source_plus: WeightedCloud,
        source_minus: WeightedCloud,
        target_plus: WeightedCloud,
        target_minus: WeightedCloud,
        cost: &CostSpec,
    ) -> Result<Self> {
        build_block_problem(
            &Discretized {
                plus: source_plus,
                minus: source_minus,
                under_resolved: false,
            },
            &Discretized {
                plus: target_plus,
                minus: target_minus,
                under_resolved: false,
            },
            cost,
        )
    }

    pub fn dim(&self) -> usize {
        self.source_plus.dim
    }

    pub fn n_sources(&self) -> usize {
        self.source_plus.len() + self.source_minus.len()
    }

    pub fn n_targets(&self) -> usize {
        self.target_plus.len() + self.target_minus.len()
    }

    pub fn source_cloud(&self, s: Sign) -> &WeightedCloud {
        match s {
            Sign::Plus => &self.source_plus,
            Sign::Minus => &self.source_minus,
        }
    }

    pub fn target_cloud(&self, s: Sign) -> &WeightedCloud {
        match s {
            Sign::Plus => &self.target_plus,
            Sign::Minus => &self.target_minus,
        }
    }

    /// Splits a global source index into sign and local index.
    #[inline]
    pub fn source_sign(&self, i: usize) -> (Sign, usize) {
        let n = self.source_plus.len();
        if i < n {
            (Sign::Plus, i)
        } else {
            (Sign::Minus, i - n)
        }
    }

    #[inline]
    pub fn target_sign(&self, j: usize) -> (Sign, usize) {
        let n = self.target_plus.len();
        if j < n {
            (Sign::Plus, j)
        } else {
            (Sign::Minus, j - n)
        }
    }

    #[inline]
    pub fn source_global(&self, s: Sign, local: usize) -> usize {
        match s {
            Sign::Plus => local,
            Sign::Minus => self.source_plus.len() + local,
        }
    }

    #[inline]
    pub fn target_global(&self, s: Sign, local: usize) -> usize {
        match s {
            Sign::Plus => local,
            Sign::Minus => self.target_plus.len() + local,
        }
    }

    #[inline]
    pub fn source_point(&self, i: usize) -> &[f64] {
        let (s, k) = self.source_sign(i);
        self.source_cloud(s).point(k)
    }

    #[inline]
    pub fn target_point(&self, j: usize) -> &[f64] {
        let (s, k) = self.target_sign(j);
        self.target_cloud(s).point(k)
    }

    pub fn source_weights(&self) -> Vec<f64> {
        let mut w = self.source_plus.weights.clone();
        w.extend_from_slice(&self.source_minus.weights);
        w
    }

    pub fn target_weights(&self) -> Vec<f64> {
        let mut w = self.target_plus.weights.clone();
        w.extend_from_slice(&self.target_minus.weights);
        w
    }

    pub fn total_mass(&self) -> f64 {
        self.source_plus.mass() + self.source_minus.mass()
    }

    #[inline]
    pub fn block_of(&self, i: usize, j: usize) -> Block {
        Block::new(self.source_sign(i).0, self.target_sign(j).0)
    }

    /// Block cost between global indices.
    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost
            .block_cost(self.block_of(i, j), self.source_point(i), self.target_point(j))
    }

    /// Dense row-major cost matrix over global indices.
    pub fn cost_matrix(&self) -> Vec<f64> {
        let m = self.n_targets();
        let mut c = Vec::with_capacity(self.n_sources() * m);
        for i in 0..self.n_sources() {
            for j in 0..m {
                c.push(self.cost(i, j));
            }
        }
        c
    }

    /// Blocks whose support product is nonempty.
    pub fn active_blocks(&self) -> Vec<Block> {
        Block::ALL
            .into_iter()
            .filter(|b| !self.source_cloud(b.source()).is_empty() && !self.target_cloud(b.target()).is_empty())
            .collect()
    }
}
