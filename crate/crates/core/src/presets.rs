//! Synthetic input pairs. Every preset is deterministic given its
//! parameters and seed.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::WeightedCloud;
use crate::error::{Result, SotxError};
use crate::fractalgeo::{generate_cantor, generate_sierpinski};
use crate::measures::{build_signed_measure, AtomSet, FractalPart, GridDensity, SignedComponent, SignedMeasure};

const SIMPSON_PANELS: usize = 32;

/// Composite Simpson rule on `[a, b]`.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let n = SIMPSON_PANELS;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// A Gaussian truncated to `mean ± sigmas * sd` in 1D, pushed forward by the
/// affine map `T(x) = scale * x + shift`.
///
/// Both grids hold exact cell averages (to quadrature accuracy). The target
/// grid has spacing `scale * h / 2` and is offset by half a cell so that the
/// image of every source cell boundary falls on a target cell centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineGaussian1d {
    pub mean: f64,
    pub sd: f64,
    pub sigmas: f64,
    pub scale: f64,
    pub shift: f64,
    pub cells: usize,
    pub mass: f64,
}

impl AffineGaussian1d {
    pub fn standard(cells: usize) -> Self {
        Self {
            mean: 0.0,
            sd: 1.0,
            sigmas: 2.0,
            scale: 2.0,
            shift: 1.0,
            cells,
            mass: 1.0,
        }
    }

    pub fn map(&self, x: f64) -> f64 {
        self.scale * x + self.shift
    }

    fn support(&self) -> (f64, f64) {
        (self.mean - self.sigmas * self.sd, self.mean + self.sigmas * self.sd)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sd > 0.0 && self.sigmas > 0.0 && self.scale > 0.0 && self.mass > 0.0) || self.cells < 4 {
            return Err(SotxError::Invalid(format!("invalid affine gaussian {self:?}")));
        }
        Ok(())
    }

    fn grid(&self, origin: f64, spacing: f64, cells: usize, mean: f64, sd: f64, lo: f64, hi: f64) -> Result<GridDensity> {
        let pdf = |x: f64| (-0.5 * ((x - mean) / sd).powi(2)).exp();
        let mut values: Vec<f64> = (0..cells)
            .map(|k| {
                let a = (origin + k as f64 * spacing).max(lo);
                let b = (origin + (k + 1) as f64 * spacing).min(hi);
                simpson(pdf, a, b)
            })
            .collect();
        let total: f64 = values.iter().sum();
        for v in &mut values {
            *v *= self.mass / (total * spacing);
        }
        GridDensity::new(vec![origin], vec![spacing], vec![cells], values)
    }

    pub fn source_grid(&self) -> Result<GridDensity> {
        self.validate()?;
        let (lo, hi) = self.support();
        let h = (hi - lo) / self.cells as f64;
        self.grid(lo, h, self.cells, self.mean, self.sd, lo, hi)
    }

    pub fn target_grid(&self) -> Result<GridDensity> {
        self.validate()?;
        let (lo, hi) = self.support();
        let h = (hi - lo) / self.cells as f64;
        let k = 0.5 * self.scale * h;
        let (tlo, thi) = (self.map(lo), self.map(hi));
        self.grid(tlo - 0.5 * k, k, 2 * self.cells + 1, self.map(self.mean), self.scale * self.sd, tlo, thi)
    }
}

/// Free-form preset parameters; each preset reads the keys it knows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PresetParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetInfo {
    pub name: String,
    pub params: PresetParams,
}

#[derive(Debug, Clone)]
pub struct PresetPair {
    pub mu: SignedMeasure,
    pub nu: SignedMeasure,
    pub info: PresetInfo,
}

pub trait Preset: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn build(&self, params: &PresetParams) -> Result<PresetPair>;
}

fn pair(name: &str, params: &PresetParams, mu: SignedMeasure, nu: SignedMeasure) -> PresetPair {
    PresetPair {
        mu,
        nu,
        info: PresetInfo {
            name: name.to_string(),
            params: params.clone(),
        },
    }
}

fn translated(part: &FractalPart, offset: &[f64], label: &str) -> Result<FractalPart> {
    let sample = part.sample.map_points(|x| x.iter().zip(offset).map(|(a, b)| a + b).collect());
    FractalPart::new(sample, part.ds, part.density_bounds, format!("{}:{label}", part.label))
}

struct CantorPair;

impl Preset for CantorPair {
    fn name(&self) -> &'static str {
        "cantor-pair"
    }
    fn describe(&self) -> &'static str {
        "Cantor set on [0,1] and its image under x -> 2x + 1"
    }
    fn build(&self, params: &PresetParams) -> Result<PresetPair> {
        let depth = params.depth.unwrap_or(8);
        let e = generate_cantor(depth, (0.0, 1.0), 1.0)?;
        let image = generate_cantor(depth, (1.0, 3.0), 1.0)?;
        let mu = build_signed_measure(SignedComponent::empty().with_fractal(e), SignedComponent::empty(), 1)?;
        let nu = build_signed_measure(SignedComponent::empty().with_fractal(image), SignedComponent::empty(), 1)?;
        Ok(pair(self.name(), params, mu, nu))
    }
}

struct SierpinskiPair;

impl Preset for SierpinskiPair {
    fn name(&self) -> &'static str {
        "sierpinski-pair"
    }
    fn describe(&self) -> &'static str {
        "Sierpinski gasket and its translate by (1.5, 0)"
    }
    fn build(&self, params: &PresetParams) -> Result<PresetPair> {
        let depth = params.depth.unwrap_or(5);
        let e = generate_sierpinski(depth, 1.0)?;
        let image = translated(&e, &[1.5, 0.0], "shift=(1.5,0)")?;
        let mu = build_signed_measure(SignedComponent::empty().with_fractal(e), SignedComponent::empty(), 2)?;
        let nu = build_signed_measure(SignedComponent::empty().with_fractal(image), SignedComponent::empty(), 2)?;
        Ok(pair(self.name(), params, mu, nu))
    }
}

/// Positive part `N(0,1)` mapped by `2x + 1`; negative part `N(10, 1/4)`
/// mapped by `1.5x - 4`. Both maps are the optimal intra-sign maps.
pub fn gaussian_signed_parts(cells: usize) -> (AffineGaussian1d, AffineGaussian1d) {
    let plus = AffineGaussian1d::standard(cells);
    let minus = AffineGaussian1d {
        mean: 10.0,
        sd: 0.5,
        sigmas: 2.0,
        scale: 1.5,
        shift: -4.0,
        cells: cells.div_ceil(2).max(4),
        mass: 0.5,
    };
    (plus, minus)
}

struct GaussianSigned;

impl Preset for GaussianSigned {
    fn name(&self) -> &'static str {
        "gaussian-signed"
    }
    fn describe(&self) -> &'static str {
        "1D truncated Gaussians on both signs with separated supports and affine optimal maps"
    }
    fn build(&self, params: &PresetParams) -> Result<PresetPair> {
        let (p, m) = gaussian_signed_parts(params.cells.unwrap_or(80));
        let mu = build_signed_measure(
            SignedComponent::empty().with_ac(p.source_grid()?),
            SignedComponent::empty().with_ac(m.source_grid()?),
            1,
        )?;
        let nu = build_signed_measure(
            SignedComponent::empty().with_ac(p.target_grid()?),
            SignedComponent::empty().with_ac(m.target_grid()?),
            1,
        )?;
        Ok(pair(self.name(), params, mu, nu))
    }
}

/// Random atoms in the unit square with masses normalized so that the
/// positive parts carry 1 and the negative parts 1/2 on both sides.
pub fn random_signed_atoms(count: usize, dim: usize, seed: u64) -> Result<(SignedMeasure, SignedMeasure)> {
    if count == 0 {
        return Err(SotxError::Invalid("atom count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms = |mass: f64| -> Result<AtomSet> {
        let coords: Vec<f64> = (0..count * dim).map(|_| rng.gen::<f64>()).collect();
        let w: Vec<f64> = (0..count).map(|_| rng.gen_range(0.5..1.5)).collect();
        let total: f64 = w.iter().sum();
        AtomSet::new(WeightedCloud::new(dim, coords, w.iter().map(|x| x * mass / total).collect())?)
    };
    let (mp, mm, np, nm) = (atoms(1.0)?, atoms(0.5)?, atoms(1.0)?, atoms(0.5)?);
    let mu = build_signed_measure(SignedComponent::empty().with_atoms(mp), SignedComponent::empty().with_atoms(mm), dim)?;
    let nu = build_signed_measure(SignedComponent::empty().with_atoms(np), SignedComponent::empty().with_atoms(nm), dim)?;
    Ok((mu, nu))
}

struct AtomsSigned;

impl Preset for AtomsSigned {
    fn name(&self) -> &'static str {
        "atoms-signed"
    }
    fn describe(&self) -> &'static str {
        "random signed atoms in the unit square"
    }
    fn build(&self, params: &PresetParams) -> Result<PresetPair> {
        let (mu, nu) = random_signed_atoms(params.count.unwrap_or(50), 2, params.seed)?;
        Ok(pair(self.name(), params, mu, nu))
    }
}

struct MixedTriple;

impl MixedTriple {
    fn side(offset: f64, cells: usize, depth: u32, rng: &mut ChaCha8Rng) -> Result<(SignedComponent, SignedComponent)> {
        let bump = |lo: f64, mass: f64| -> Result<GridDensity> {
            let mut g = GridDensity::from_fn(&[lo], &[lo + 1.0], &[cells], |x| {
                let t = x[0] - lo - 0.5;
                1.0 + 0.5 * (std::f64::consts::PI * t).cos()
            })?;
            let scale = mass / g.mass();
            g.values.iter_mut().for_each(|v| *v *= scale);
            Ok(g)
        };
        let mut atoms = |lo: f64, mass: f64| -> Result<AtomSet> {
            let coords: Vec<f64> = (0..4).map(|k| lo + 0.25 * k as f64 + rng.gen_range(0.0..0.2)).collect();
            AtomSet::new(WeightedCloud::new(1, coords, vec![mass / 4.0; 4])?)
        };
        let plus = SignedComponent::empty()
            .with_ac(bump(offset, 0.5)?)
            .with_atoms(atoms(offset + 1.5, 0.25)?)
            .with_fractal(generate_cantor(depth, (offset + 3.0, offset + 4.0), 0.25)?);
        let minus = SignedComponent::empty()
            .with_ac(bump(offset + 10.0, 0.25)?)
            .with_atoms(atoms(offset + 11.5, 0.125)?)
            .with_fractal(generate_cantor(depth, (offset + 13.0, offset + 14.0), 0.125)?);
        Ok((plus, minus))
    }
}

impl Preset for MixedTriple {
    fn name(&self) -> &'static str {
        "mixed-triple"
    }
    fn describe(&self) -> &'static str {
        "1D pair with densities, atoms and Cantor parts on both signs"
    }
    fn build(&self, params: &PresetParams) -> Result<PresetPair> {
        let cells = params.cells.unwrap_or(40);
        let depth = params.depth.unwrap_or(6);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let (mp, mm) = Self::side(0.0, cells, depth, &mut rng)?;
        let (np, nm) = Self::side(0.3, cells, depth, &mut rng)?;
        let mu = build_signed_measure(mp, mm, 1)?;
        let nu = build_signed_measure(np, nm, 1)?;
        Ok(pair(self.name(), params, mu, nu))
    }
}

fn registry() -> BTreeMap<&'static str, Arc<dyn Preset>> {
    let all: Vec<Arc<dyn Preset>> = vec![
        Arc::new(CantorPair),
        Arc::new(SierpinskiPair),
        Arc::new(GaussianSigned),
        Arc::new(AtomsSigned),
        Arc::new(MixedTriple),
    ];
    all.into_iter().map(|p| (p.name(), p)).collect()
}

pub fn preset_names() -> Vec<&'static str> {
    registry().into_keys().collect()
}

pub fn find_preset(name: &str) -> Result<Arc<dyn Preset>> {
    registry().remove(name).ok_or_else(|| SotxError::Unknown {
        kind: "preset",
        name: name.to_string(),
    })
}
