//! Run configuration shared by the pipeline and the CLI.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SotxError};
use crate::fractalgeo::{QuadratureSpec, RhoSpec};
use crate::partition::PartitionParams;
use crate::regularize::{KernelOptions, RegularizationParams};
use crate::transport::{CostSpec, SolverSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub alpha: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// Bandwidth; `None` uses a tenth of each fractal sample's diameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default)]
    pub rho: RhoSpec,
    #[serde(default)]
    pub position_weighted: bool,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            h: None,
            rho: RhoSpec::default(),
            position_weighted: false,
            quadrature: QuadratureSpec::default(),
        }
    }
}

impl KernelConfig {
    pub fn options(&self) -> KernelOptions {
        KernelOptions {
            rho: self.rho.clone(),
            quadrature: self.quadrature.clone(),
            position_weighted: self.position_weighted,
        }
    }
}

/// Tolerances of the `verify` checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Minimum max-norm ratio per grid halving.
    pub refinement_ratio: f64,
    /// Max-norm bound for single-resolution Monge-Ampere residuals.
    pub ma_residual: f64,
    /// Relative tolerance of the Legendre residual.
    pub legendre: f64,
    pub cycles: usize,
    pub max_cycle_len: usize,
    /// Exhaustive 2-cycle scan when the plan has at most this many pairs.
    pub exhaustive_pairs: usize,
    pub ds_tolerance: f64,
    pub kernel_normalization: f64,
    pub weak_error_functions: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            refinement_ratio: 1.7,
            ma_residual: 0.05,
            legendre: 1e-6,
            cycles: 1000,
            max_cycle_len: 4,
            exhaustive_pairs: 2000,
            ds_tolerance: 0.1,
            kernel_normalization: 1e-3,
            weak_error_functions: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub solver: SolverSpec,
    /// `None` solves the raw measures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<RegularizationParams>,
    /// Cells per axis for grid parts; `None` keeps native grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub partition: PartitionParams,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cost: CostConfig::default(),
            solver: SolverSpec::default(),
            regularization: None,
            resolution: None,
            partition: PartitionParams::default(),
            kernel: KernelConfig::default(),
            verify: VerifyConfig::default(),
            seed: 0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SotxError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cost.alpha >= 0.0 && self.cost.alpha.is_finite()) {
            return Err(SotxError::Invalid(format!("alpha must be >= 0, got {}", self.cost.alpha)));
        }
        if let Some(eps) = self.solver.epsilon {
            positive("solver.epsilon", eps)?;
        }
        if let Some(r) = &self.regularization {
            r.validate()?;
        }
        positive("partition.delta", self.partition.delta)?;
        if let Some(t) = self.partition.tie_tolerance {
            positive("partition.tie_tolerance", t)?;
        }
        if let Some(h) = self.kernel.h {
            positive("kernel.h", h)?;
        }
        let v = &self.verify;
        for (name, x) in [
            ("verify.refinement_ratio", v.refinement_ratio),
            ("verify.ma_residual", v.ma_residual),
            ("verify.legendre", v.legendre),
            ("verify.ds_tolerance", v.ds_tolerance),
            ("verify.kernel_normalization", v.kernel_normalization),
        ] {
            positive(name, x)?;
        }
        if v.cycles == 0 || v.max_cycle_len < 2 || v.weak_error_functions == 0 {
            return Err(SotxError::Invalid(
                "verify.cycles and verify.weak_error_functions must be positive, verify.max_cycle_len >= 2".into(),
            ));
        }
        Ok(())
    }

    pub fn cost_spec(&self) -> Result<CostSpec> {
        CostSpec::quadratic(self.cost.alpha)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash_is_stable() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.hash(), back.hash());
        let mut d = c.clone();
        d.seed = 1;
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"cost": {"alpha": 1.0}, "seed": 7}"#).unwrap();
        assert_eq!(c.cost.alpha, 1.0);
        assert_eq!(c.solver.kind, "exact");
        assert_eq!(c.verify.cycles, 1000);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        let mut c = RunConfig::default();
        c.partition.delta = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.verify.legendre = -1.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.cost.alpha = -0.1;
        assert!(c.validate().is_err());
    }
}
