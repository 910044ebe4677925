//! Radial profiles `rho` supported on `[0, 1]`, registered by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SotxError};

/// Decreasing profile on `[0, 1]` with `rho(0) > 0`, zero outside.
pub trait RadialProfile: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn eval(&self, t: f64) -> f64;

    /// `∫_{R^d} rho(|w|) dw`.
    fn l1_norm(&self, dim: usize) -> f64 {
        // composite Simpson on the radial integral
        let n = 4096;
        let h = 1.0 / n as f64;
        let f = |t: f64| self.eval(t) * t.powi(dim as i32 - 1);
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        sphere_area(dim) * s * h / 3.0
    }
}

/// Surface area of the unit sphere in `R^d`, for `d <= 3`.
pub(crate) fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => {
            // 2 pi^(d/2) / Gamma(d/2) via the recursion S_d = 2 pi S_{d-2} / (d - 2)
            let mut s = if dim % 2 == 0 { 2.0 * std::f64::consts::PI } else { 4.0 * std::f64::consts::PI };
            let mut k = if dim % 2 == 0 { 2 } else { 3 };
            while k < dim {
                k += 2;
                s *= 2.0 * std::f64::consts::PI / (k - 2) as f64;
            }
            s
        }
    }
}

/// Name and parameters of a profile, as stored in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl Default for RhoSpec {
    fn default() -> Self {
        Self {
            name: "poly6".into(),
            params: Vec::new(),
        }
    }
}

/// `scale * (1 - t^2)^power` on `[0, 1]`.
#[derive(Debug, Clone)]
struct Polynomial {
    name: &'static str,
    power: i32,
    scale: f64,
}

impl RadialProfile for Polynomial {
    fn name(&self) -> &str {
        self.name
    }

    fn eval(&self, t: f64) -> f64 {
        if (0.0..1.0).contains(&t) {
            self.scale * (1.0 - t * t).powi(self.power)
        } else {
            0.0
        }
    }
}

/// `scale * exp(1 - 1 / (1 - t^2))`, smooth at the boundary.
#[derive(Debug, Clone)]
struct Bump {
    scale: f64,
}

impl RadialProfile for Bump {
    fn name(&self) -> &str {
        "bump"
    }

    fn eval(&self, t: f64) -> f64 {
        if (0.0..1.0).contains(&t) {
            self.scale * (1.0 - 1.0 / (1.0 - t * t)).exp()
        } else {
            0.0
        }
    }
}

type Factory = fn(&[f64]) -> Result<Arc<dyn RadialProfile>>;

fn scale_param(params: &[f64]) -> Result<f64> {
    match params {
        [] => Ok(1.0),
        [s] if *s > 0.0 => Ok(*s),
        _ => Err(SotxError::Invalid(format!(
            "profile takes at most one positive scale parameter, got {params:?}"
        ))),
    }
}

fn registry() -> BTreeMap<&'static str, Factory> {
    let mut m: BTreeMap<&'static str, Factory> = BTreeMap::new();
    m.insert("poly6", |p| {
        Ok(Arc::new(Polynomial {
            name: "poly6",
            power: 3,
            scale: scale_param(p)?,
        }))
    });
    m.insert("poly8", |p| {
        Ok(Arc::new(Polynomial {
            name: "poly8",
            power: 4,
            scale: scale_param(p)?,
        }))
    });
    m.insert("bump", |p| Ok(Arc::new(Bump { scale: scale_param(p)? })));
    m
}

pub fn profile_names() -> Vec<&'static str> {
    registry().keys().copied().collect()
}

pub fn build_profile(spec: &RhoSpec) -> Result<Arc<dyn RadialProfile>> {
    let factory = registry().get(spec.name.as_str()).copied().ok_or_else(|| SotxError::Unknown {
        kind: "profile",
        name: spec.name.clone(),
    })?;
    factory(&spec.params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_shape() {
        let p = build_profile(&RhoSpec::default()).unwrap();
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(1.0), 0.0);
        assert_eq!(p.eval(1.5), 0.0);
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let v = p.eval(i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn l1_norms_match_closed_forms() {
        let p = build_profile(&RhoSpec::default()).unwrap();
        // 2 ∫ (1-t^2)^3 dt = 32/35 and 2 pi ∫ (1-t^2)^3 t dt = pi / 4
        assert!((p.l1_norm(1) - 32.0 / 35.0).abs() < 1e-10);
        assert!((p.l1_norm(2) - std::f64::consts::PI / 4.0).abs() < 1e-10);
    }

    #[test]
    fn every_registered_profile_is_admissible() {
        for name in profile_names() {
            let p = build_profile(&RhoSpec { name: name.into(), params: vec![] }).unwrap();
            assert!(p.eval(0.0) > 0.0, "{name}");
            assert_eq!(p.eval(1.0), 0.0, "{name}");
        }
        assert!(build_profile(&RhoSpec { name: "gauss".into(), params: vec![] }).is_err());
    }
}
