use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{dist2, WeightedCloud};
use crate::error::{Result, SotxError};
use crate::measures::Sign;

/// One of the four sign pairings of source and target mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Block {
    #[serde(rename = "pp")]
    PP,
    #[serde(rename = "mm")]
    MM,
    #[serde(rename = "pm")]
    PM,
    #[serde(rename = "mp")]
    MP,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::PP, Block::MM, Block::PM, Block::MP];

    pub fn new(source: Sign, target: Sign) -> Block {
        match (source, target) {
            (Sign::Plus, Sign::Plus) => Block::PP,
            (Sign::Minus, Sign::Minus) => Block::MM,
            (Sign::Plus, Sign::Minus) => Block::PM,
            (Sign::Minus, Sign::Plus) => Block::MP,
        }
    }

    pub fn source(self) -> Sign {
        match self {
            Block::PP | Block::PM => Sign::Plus,
            Block::MM | Block::MP => Sign::Minus,
        }
    }

    pub fn target(self) -> Sign {
        match self {
            Block::PP | Block::MP => Sign::Plus,
            Block::MM | Block::PM => Sign::Minus,
        }
    }

    pub fn is_inter(self) -> bool {
        matches!(self, Block::PM | Block::MP)
    }

    pub fn key(self) -> &'static str {
        match self {
            Block::PP => "pp",
            Block::MM => "mm",
            Block::PM => "pm",
            Block::MP => "mp",
        }
    }

    pub fn region_name(self) -> &'static str {
        match self {
            Block::PP => "PP",
            Block::MM => "MM",
            Block::PM => "PM",
            Block::MP => "MP",
        }
    }
}

type ScalarFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// A user-supplied inter-sign penalty. Derivative callables are optional;
/// matrices are `d x d` row-major.
#[derive(Clone)]
pub struct CustomPenalty {
    pub name: String,
    pub value: ScalarFn,
    pub eigenbounds: (f64, f64),
    pub grad_y: Option<MatrixFn>,
    pub hess_yy: Option<MatrixFn>,
    pub hess_xy: Option<MatrixFn>,
}

impl fmt::Debug for CustomPenalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPenalty")
            .field("name", &self.name)
            .field("eigenbounds", &self.eigenbounds)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Penalty {
    /// `lambda(x, y) = alpha |x - y|^2`.
    Quadratic { alpha: f64 },
    Custom(CustomPenalty),
}

/// Intra-sign cost `c = |x - y|^2 / 2` and inter-sign cost `c + lambda`.
#[derive(Debug, Clone)]
pub struct CostSpec {
    pub penalty: Penalty,
}

/// Serializable description of a cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostDescription {
    QuadraticPenalty { alpha: f64 },
    Custom { name: String, eigenbounds: (f64, f64) },
}

impl CostSpec {
    /// Quadratic penalty. `alpha = 0` is accepted (pure quadratic cost) but
    /// fails the convexity diagnostic.
    pub fn quadratic(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(SotxError::Invalid(format!("penalty coefficient {alpha} must be >= 0")));
        }
        Ok(Self {
            penalty: Penalty::Quadratic { alpha },
        })
    }

    pub fn custom(p: CustomPenalty) -> Result<Self> {
        let (lo, hi) = p.eigenbounds;
        if !(lo > 0.0 && lo <= hi) {
            return Err(SotxError::Invalid(format!(
                "custom penalty eigenbounds ({lo}, {hi}) need 0 < lo <= hi"
            )));
        }
        Ok(Self {
            penalty: Penalty::Custom(p),
        })
    }

    pub fn describe(&self) -> CostDescription {
        match &self.penalty {
            Penalty::Quadratic { alpha } => CostDescription::QuadraticPenalty { alpha: *alpha },
            Penalty::Custom(p) => CostDescription::Custom {
                name: p.name.clone(),
                eigenbounds: p.eigenbounds,
            },
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.penalty {
            Penalty::Quadratic { alpha } => Some(alpha),
            Penalty::Custom(_) => None,
        }
    }

    #[inline]
    pub fn intra(&self, x: &[f64], y: &[f64]) -> f64 {
        0.5 * dist2(x, y)
    }

    #[inline]
    pub fn lambda(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.penalty {
            Penalty::Quadratic { alpha } => alpha * dist2(x, y),
            Penalty::Custom(p) => (p.value)(x, y),
        }
    }

    #[inline]
    pub fn inter(&self, x: &[f64], y: &[f64]) -> f64 {
        self.intra(x, y) + self.lambda(x, y)
    }

    #[inline]
    pub fn block_cost(&self, block: Block, x: &[f64], y: &[f64]) -> f64 {
        if block.is_inter() {
            self.inter(x, y)
        } else {
            self.intra(x, y)
        }
    }

    /// `grad_y lambda(x, y)`, when available.
    pub fn grad_y_lambda(&self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        match &self.penalty {
            Penalty::Quadratic { alpha } => Some(y.iter().zip(x).map(|(yi, xi)| 2.0 * alpha * (yi - xi)).collect()),
            Penalty::Custom(p) => p.grad_y.as_ref().map(|g| g(x, y)),
        }
    }

    /// `D^2_yy lambda(x, y)`, when available.
    pub fn hess_yy_lambda(&self, x: &[f64], y: &[f64]) -> Option<DMatrix<f64>> {
        let d = x.len();
        match &self.penalty {
            Penalty::Quadratic { alpha } => Some(DMatrix::identity(d, d) * (2.0 * alpha)),
            Penalty::Custom(p) => p.hess_yy.as_ref().map(|h| DMatrix::from_row_slice(d, d, &h(x, y))),
        }
    }

    /// `D^2_xy lambda(x, y)`, when available.
    pub fn hess_xy_lambda(&self, x: &[f64], y: &[f64]) -> Option<DMatrix<f64>> {
        let d = x.len();
        match &self.penalty {
            Penalty::Quadratic { alpha } => Some(DMatrix::identity(d, d) * (-2.0 * alpha)),
            Penalty::Custom(p) => p.hess_xy.as_ref().map(|h| DMatrix::from_row_slice(d, d, &h(x, y))),
        }
    }

    /// Declared or analytic `(alpha_0, beta_0)` bounds on `D^2_yy lambda`.
    pub fn eigenbounds(&self) -> (f64, f64) {
        match &self.penalty {
            Penalty::Quadratic { alpha } => (2.0 * alpha, 2.0 * alpha),
            Penalty::Custom(p) => p.eigenbounds,
        }
    }

    /// Eigenvalue range of `D^2_yy lambda` at sampled pairs from the two
    /// clouds, by central finite differences for custom penalties.
    pub fn measured_eigenbounds(&self, xs: &WeightedCloud, ys: &WeightedCloud, samples: usize, rng: &mut impl Rng) -> (f64, f64) {
        if let Penalty::Quadratic { alpha } = self.penalty {
            return (2.0 * alpha, 2.0 * alpha);
        }
        if xs.is_empty() || ys.is_empty() {
            return self.eigenbounds();
        }
        let d = xs.dim;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..samples.max(1) {
            let x = xs.point(rng.gen_range(0..xs.len())).to_vec();
            let y = ys.point(rng.gen_range(0..ys.len())).to_vec();
            let hess = fd_hessian_y(&|x: &[f64], y: &[f64]| self.lambda(x, y), &x, &y, 1e-4);
            let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &hess));
            for &v in eig.eigenvalues.iter() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// Central-difference Hessian of `f(x, .)` at `y`, row-major and symmetrized.
pub fn fd_hessian_y(f: &dyn Fn(&[f64], &[f64]) -> f64, x: &[f64], y: &[f64], step: f64) -> Vec<f64> {
    let d = y.len();
    let mut h = vec![0.0; d * d];
    let mut yy = y.to_vec();
    let f0 = f(x, y);
    for a in 0..d {
        for b in a..d {
            let val = if a == b {
                yy[a] = y[a] + step;
                let fp = f(x, &yy);
                yy[a] = y[a] - step;
                let fm = f(x, &yy);
                yy[a] = y[a];
                (fp - 2.0 * f0 + fm) / (step * step)
            } else {
                let mut eval = |sa: f64, sb: f64| {
                    yy[a] = y[a] + sa * step;
                    yy[b] = y[b] + sb * step;
                    let v = f(x, &yy);
                    yy[a] = y[a];
                    yy[b] = y[b];
                    v
                };
                (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * step * step)
            };
            h[a * d + b] = val;
            h[b * d + a] = val;
        }
    }
    h
}
