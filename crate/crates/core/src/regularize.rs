//! The signed regularization operator: mollify AC parts with sign-specific
//! radii, keep atoms, and smooth fractal parts with the adaptive kernel.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::BallIndex;
use crate::error::{Result, SotxError};
use crate::fractalgeo::{
    build_profile, covering_grid, fractal_smooth, kernel_normalizer, KernelSpec, QuadratureSpec, RadialProfile, RhoSpec,
};
use crate::measures::{build_signed_measure, FractalPart, GridDensity, SignedComponent, SignedMeasure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub h: f64,
    pub n: u32,
    /// Cells per bandwidth on the smoothed fractal grid.
    pub grid_resolution: usize,
}

impl RegularizationParams {
    /// Stage `n` of the default schedule for support gap `gap` and initial
    /// bandwidth `h0`.
    pub fn schedule(gap: f64, h0: f64, n: u32, grid_resolution: usize) -> Self {
        let s = 0.5f64.powi(n as i32);
        Self {
            delta_plus: s * gap / 4.0,
            delta_minus: s * gap / 5.0,
            h: s * h0,
            n,
            grid_resolution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_plus > 0.0 && self.delta_minus > 0.0) {
            return Err(SotxError::Invalid("mollifier radii must be positive".into()));
        }
        if self.delta_plus == self.delta_minus {
            return Err(SotxError::Invalid(format!(
                "mollifier radii must differ by sign, both are {}",
                self.delta_plus
            )));
        }
        if !(self.h > 0.0) {
            return Err(SotxError::Invalid(format!("bandwidth {} must be positive", self.h)));
        }
        if self.grid_resolution < 2 {
            return Err(SotxError::Invalid("grid_resolution must be at least 2".into()));
        }
        Ok(())
    }
}

/// Kernel settings shared by every fractal part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    pub rho: RhoSpec,
    pub quadrature: QuadratureSpec,
    pub position_weighted: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            rho: RhoSpec::default(),
            quadrature: QuadratureSpec::default(),
            position_weighted: false,
        }
    }
}

/// Discrete convolution with the radial bump of radius `delta`. Stencil
/// weights are normalized to sum to one, so mass is preserved to rounding;
/// the grid is padded so nothing is lost at the border.
pub fn mollify_ac(density: &GridDensity, delta: f64, profile: &dyn RadialProfile) -> Result<GridDensity> {
    if delta < density.max_spacing() {
        return Err(SotxError::Invalid(format!(
            "mollifier radius {delta} below grid spacing {}",
            density.max_spacing()
        )));
    }
    let d = density.dim();
    let pad: Vec<usize> = density.spacing.iter().map(|s| (delta / s).floor() as usize).collect();
    let mut stencil: Vec<(Vec<isize>, f64)> = Vec::new();
    let extents: Vec<usize> = pad.iter().map(|p| 2 * p + 1).collect();
    let count: usize = extents.iter().product();
    for lin in 0..count {
        let mut rem = lin;
        let mut off = vec![0isize; d];
        for k in (0..d).rev() {
            off[k] = (rem % extents[k]) as isize - pad[k] as isize;
            rem /= extents[k];
        }
        let r = off
            .iter()
            .zip(&density.spacing)
            .map(|(o, s)| (*o as f64 * s).powi(2))
            .sum::<f64>()
            .sqrt();
        let w = profile.eval(r / delta);
        if w > 0.0 {
            stencil.push((off, w));
        }
    }
    let total: f64 = stencil.iter().map(|s| s.1).sum();
    stencil.iter_mut().for_each(|s| s.1 /= total);

    let origin: Vec<f64> = density
        .origin
        .iter()
        .zip(&density.spacing)
        .zip(&pad)
        .map(|((o, s), p)| o - *p as f64 * s)
        .collect();
    let shape: Vec<usize> = density.shape.iter().zip(&pad).map(|(n, p)| n + 2 * p).collect();
    let mut out = GridDensity::new(origin, density.spacing.clone(), shape.clone(), vec![0.0; shape.iter().product()])?;
    let mut target = vec![0usize; d];
    for (lin, &v) in density.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let idx = density.multi_index(lin);
        for (off, w) in &stencil {
            for k in 0..d {
                target[k] = (idx[k] as isize + pad[k] as isize + off[k]) as usize;
            }
            let t = out.linear_index(&target);
            out.values[t] += v * w;
        }
    }
    Ok(out)
}

fn smooth_part(part: &FractalPart, h: f64, cells_per_h: usize, opts: &KernelOptions) -> Result<GridDensity> {
    let mut spec = KernelSpec::new(part.clone(), h, opts.rho.clone(), opts.quadrature.clone(), opts.position_weighted)?;
    kernel_normalizer(&mut spec)?;
    let grid = covering_grid(part, h, cells_per_h)?;
    fractal_smooth(part, &spec, &grid)
}

/// Whether anything of `a` lies in the support of `b`.
fn collide(a: &SignedComponent, b: &SignedComponent) -> bool {
    for ga in a.grids() {
        for gb in b.grids() {
            if !(ga.support_gap(gb) > 0.0) {
                return true;
            }
        }
    }
    let atoms_hit = |x: &SignedComponent, y: &SignedComponent| {
        x.atoms
            .as_ref()
            .map_or(false, |at| at.cloud.points().any(|p| y.grids().any(|g| g.value_at(p) > 0.0)))
    };
    if atoms_hit(a, b) || atoms_hit(b, a) {
        return true;
    }
    if let (Some(x), Some(y)) = (&a.atoms, &b.atoms) {
        let index = BallIndex::new(&y.cloud);
        if x.cloud.points().any(|p| index.any_within(p, 0.0)) {
            return true;
        }
    }
    false
}

/// `R_n(sigma)`: AC parts mollified with `delta_plus` / `delta_minus`,
/// atoms unchanged, fractal parts replaced by their smoothed densities.
pub fn apply_rn(m: &SignedMeasure, params: &RegularizationParams, opts: &KernelOptions) -> Result<SignedMeasure> {
    params.validate()?;
    if let (Some(a), Some(b)) = (&m.plus.ac, &m.minus.ac) {
        let gap = a.support_gap(b);
        if params.delta_plus.max(params.delta_minus) >= gap / 2.0 {
            return Err(SotxError::Invalid(format!(
                "mollifier radii ({}, {}) not below half the support gap {gap}",
                params.delta_plus, params.delta_minus
            )));
        }
    }
    let profile = build_profile(&opts.rho)?;
    let one = |c: &SignedComponent, delta: f64| -> Result<SignedComponent> {
        let ac = c.ac.as_ref().map(|g| mollify_ac(g, delta, profile.as_ref())).transpose()?;
        let smoothed = match (&c.fractal, &c.smoothed) {
            (Some(f), _) => Some(smooth_part(f, params.h, params.grid_resolution, opts)?),
            (None, s) => s.clone(),
        };
        Ok(SignedComponent {
            ac,
            atoms: c.atoms.clone(),
            fractal: None,
            smoothed,
        })
    };
    let plus = one(&m.plus, params.delta_plus)?;
    let minus = one(&m.minus, params.delta_minus)?;
    if collide(&plus, &minus) {
        return Err(SotxError::Invalid(
            "plus and minus supports collide after regularization; shrink the radii or bandwidth".into(),
        ));
    }
    let out = build_signed_measure(plus, minus, m.dim)?;
    for (before, after) in [(m.plus_masses, out.plus_masses), (m.minus_masses, out.minus_masses)] {
        let pairs = [
            (before.ac, after.ac),
            (before.atoms, after.atoms),
            (before.fractal + before.smoothed, after.smoothed),
        ];
        for (b, a) in pairs {
            if (a - b).abs() > 1e-3 * b.max(f64::MIN_POSITIVE) && (a - b).abs() > 1e-15 {
                return Err(SotxError::Internal(format!("regularization changed a part mass from {b} to {a}")));
            }
        }
    }
    Ok(out)
}

/// A test function with a known Lipschitz constant.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub lipschitz: f64,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

/// `count` seeded 1-Lipschitz functions `x ↦ g(u·x)` with `|u| = 1` and
/// `g` piecewise linear with slopes in `[-1, 1]`, knots spread over
/// `[-span, span]`.
pub fn random_lipschitz_functions(count: usize, dim: usize, span: f64, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let mut u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            u.iter_mut().for_each(|x| *x /= norm);
            let mut knots: Vec<f64> = (0..6).map(|_| rng.gen_range(-span..span)).collect();
            knots.sort_by(f64::total_cmp);
            let slopes: Vec<f64> = (0..=knots.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let offset: f64 = rng.gen_range(-1.0..1.0);
            // antiderivative of the slopes anchored at the first knot
            let mut at_knot = vec![0.0; knots.len()];
            for i in 1..knots.len() {
                at_knot[i] = at_knot[i - 1] + slopes[i] * (knots[i] - knots[i - 1]);
            }
            let anti = move |t: f64| {
                let seg = knots.partition_point(|k| *k <= t);
                if seg == 0 {
                    slopes[0] * (t - knots[0])
                } else {
                    at_knot[seg - 1] + slopes[seg] * (t - knots[seg - 1])
                }
            };
            let base = offset - anti(0.0);
            let f = move |x: &[f64]| {
                let t: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
                base + anti(t)
            };
            TestFunction {
                name: format!("pl-{k}"),
                lipschitz: 1.0,
                f: Arc::new(f),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorRow {
    pub name: String,
    pub lipschitz: f64,
    pub error: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorReport {
    pub h: f64,
    pub mass: f64,
    pub rows: Vec<WeakErrorRow>,
    /// Largest `error / bound`.
    pub max_ratio: f64,
    pub pass: bool,
}

/// Compares `∫ phi d(mu_s * K_h)` with `∫ phi d mu_s` for each test function
/// against `mass * h * Lip(phi)`. The smoothed integral is evaluated on the
/// kernel quadrature nodes, so no grid error enters.
pub fn weak_error_check(part: &FractalPart, spec: &KernelSpec, test_fns: &[TestFunction]) -> Result<WeakErrorReport> {
    if spec.z_h.is_none() {
        return Err(SotxError::Invalid("kernel normalizer not computed".into()));
    }
    let mass = part.mass();
    let pts: Vec<(&[f64], f64)> = part.sample.points().zip(part.sample.weights.iter().copied()).collect();
    let rows: Vec<Result<WeakErrorRow>> = test_fns
        .par_iter()
        .map(|tf| {
            let mut smoothed = 0.0;
            let mut raw = 0.0;
            for &(y, w) in &pts {
                let mut acc = 0.0;
                spec.transfer(y, |x, q| acc += q * (tf.f)(x))?;
                smoothed += w * acc;
                raw += w * (tf.f)(y);
            }
            let error = (smoothed - raw).abs();
            let bound = mass * spec.h * tf.lipschitz;
            Ok(WeakErrorRow {
                name: tf.name.clone(),
                lipschitz: tf.lipschitz,
                error,
                bound,
                pass: error <= bound * (1.0 + 1e-6) + 1e-10 * (mass + raw.abs()),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let max_ratio = rows
        .iter()
        .map(|r| if r.bound > 0.0 { r.error / r.bound } else { 0.0 })
        .fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.pass);
    Ok(WeakErrorReport {
        h: spec.h,
        mass,
        rows,
        max_ratio,
        pass,
    })
}
