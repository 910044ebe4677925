//! The dimension-adapted kernel
//! `K(z) = h^{-ds} rho(|z|/h) H(E ∩ B(z, h)) / Z_h` and its quadrature.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profile::{build_profile, RadialProfile, RhoSpec};
use crate::cloud::{norm, BallIndex};
use crate::error::{Result, SotxError};
use crate::measures::{FractalPart, GridDensity};

const BATCHES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes: 100_000,
            seed: 0,
        }
    }
}

/// Stratified nodes over `[-h, h]^d`, one uniform point per cell.
#[derive(Debug)]
struct Nodes {
    dim: usize,
    offsets: Vec<f64>,
    volume: f64,
}

impl Nodes {
    fn stratified(dim: usize, h: f64, requested: usize, seed: u64) -> Self {
        let per_axis = (requested as f64).powf(1.0 / dim as f64).ceil().max(1.0) as usize;
        let total = per_axis.pow(dim as u32);
        let cell = 2.0 * h / per_axis as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offsets = Vec::with_capacity(total * dim);
        for lin in 0..total {
            let mut rem = lin;
            let mut idx = vec![0usize; dim];
            for k in (0..dim).rev() {
                idx[k] = rem % per_axis;
                rem /= per_axis;
            }
            for &i in &idx {
                offsets.push(-h + (i as f64 + rng.gen::<f64>()) * cell);
            }
        }
        Self {
            dim,
            offsets,
            volume: cell.powi(dim as i32),
        }
    }

    fn len(&self) -> usize {
        self.offsets.len() / self.dim
    }

    fn offset(&self, k: usize) -> &[f64] {
        &self.offsets[k * self.dim..(k + 1) * self.dim]
    }
}

/// Node offsets with their share of the kernel's unit mass.
#[derive(Debug)]
struct Transfer {
    dim: usize,
    offsets: Vec<f64>,
    masses: Vec<f64>,
}

/// Kernel parameters, the fractal support `E`, and cached quadrature.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub ds: f64,
    pub h: f64,
    pub rho: RhoSpec,
    pub e_sample: FractalPart,
    pub z_h: Option<f64>,
    pub z_h_stderr: Option<f64>,
    pub quadrature: QuadratureSpec,
    /// Evaluate the Hausdorff weight at the evaluation point instead of the
    /// offset. Each source then carries its own normalizer.
    pub position_weighted: bool,
    profile: Arc<dyn RadialProfile>,
    index: Arc<BallIndex>,
    nodes: Option<Arc<Nodes>>,
    transfer: Option<Arc<Transfer>>,
}

/// Serializable view of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub ds: f64,
    pub h: f64,
    pub rho: RhoSpec,
    pub z_h: Option<f64>,
    pub quadrature: QuadratureSpec,
    pub position_weighted: bool,
    pub z_h_stderr: Option<f64>,
}

impl KernelSpec {
    pub fn new(e: FractalPart, h: f64, rho: RhoSpec, quadrature: QuadratureSpec, position_weighted: bool) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(SotxError::Invalid(format!("bandwidth {h} must be positive")));
        }
        if quadrature.nodes < 10_000 {
            return Err(SotxError::Invalid(format!(
                "kernel quadrature needs at least 1e4 nodes, got {}",
                quadrature.nodes
            )));
        }
        let profile = build_profile(&rho)?;
        let index = Arc::new(BallIndex::new(&e.sample));
        Ok(Self {
            ds: e.ds,
            h,
            rho,
            e_sample: e,
            z_h: None,
            z_h_stderr: None,
            quadrature,
            position_weighted,
            profile,
            index,
            nodes: None,
            transfer: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.e_sample.dim()
    }

    pub fn profile(&self) -> &dyn RadialProfile {
        self.profile.as_ref()
    }

    pub fn summary(&self) -> KernelSummary {
        KernelSummary {
            ds: self.ds,
            h: self.h,
            rho: self.rho.clone(),
            z_h: self.z_h,
            quadrature: self.quadrature.clone(),
            position_weighted: self.position_weighted,
            z_h_stderr: self.z_h_stderr,
        }
    }

    /// Same kernel with a different quadrature seed and no cached values.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.quadrature.seed = seed;
        s.z_h = None;
        s.z_h_stderr = None;
        s.nodes = None;
        s.transfer = None;
        s
    }

    /// `h^{-ds} H(E ∩ B(p, h))`.
    #[inline]
    pub fn hausdorff_weight(&self, p: &[f64]) -> f64 {
        self.h.powf(-self.ds) * self.index.ball_mass(p, self.h)
    }

    #[inline]
    fn radial(&self, z: &[f64]) -> f64 {
        self.profile.eval(norm(z) / self.h)
    }

    /// Unnormalized kernel for the literal (offset-weighted) convention.
    #[inline]
    pub fn unnormalized(&self, z: &[f64]) -> f64 {
        let r = self.radial(z);
        if r == 0.0 {
            return 0.0;
        }
        r * self.hausdorff_weight(z)
    }

    fn nodes(&mut self) -> Arc<Nodes> {
        if self.nodes.is_none() {
            self.nodes = Some(Arc::new(Nodes::stratified(
                self.dim(),
                self.h,
                self.quadrature.nodes,
                self.quadrature.seed,
            )));
        }
        self.nodes.clone().expect("nodes built")
    }

    /// Normalizer of the position-weighted kernel for a source at `y`.
    pub fn source_normalizer(&mut self, y: &[f64]) -> f64 {
        let nodes = self.nodes();
        position_norm(self, &nodes, y)
    }

    /// Calls `f(x, q)` for the quadrature image of a unit mass at `y`: the
    /// points `x` and their masses `q`, which sum to one.
    pub fn transfer(&self, y: &[f64], mut f: impl FnMut(&[f64], f64)) -> Result<()> {
        let d = self.dim();
        let mut x = vec![0.0; d];
        if self.position_weighted {
            let nodes = self.nodes.as_ref().ok_or_else(missing_normalizer)?;
            let z = position_norm(self, nodes, y);
            if !(z > 0.0) {
                return Err(SotxError::Internal(format!(
                    "position-weighted normalizer vanishes at {y:?}"
                )));
            }
            for k in 0..nodes.len() {
                let off = nodes.offset(k);
                let r = self.radial(off);
                if r == 0.0 {
                    continue;
                }
                for i in 0..d {
                    x[i] = y[i] + off[i];
                }
                let w = self.hausdorff_weight(&x);
                if w > 0.0 {
                    f(&x, nodes.volume * r * w / z);
                }
            }
        } else {
            let t = self.transfer.as_ref().ok_or_else(missing_normalizer)?;
            for (k, &q) in t.masses.iter().enumerate() {
                let off = &t.offsets[k * t.dim..(k + 1) * t.dim];
                for i in 0..d {
                    x[i] = y[i] + off[i];
                }
                f(&x, q);
            }
        }
        Ok(())
    }
}

fn missing_normalizer() -> SotxError {
    SotxError::Invalid("kernel normalizer not computed".into())
}

fn position_norm(spec: &KernelSpec, nodes: &Nodes, y: &[f64]) -> f64 {
    let d = spec.dim();
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    for k in 0..nodes.len() {
        let off = nodes.offset(k);
        let r = spec.radial(off);
        if r == 0.0 {
            continue;
        }
        for i in 0..d {
            x[i] = y[i] + off[i];
        }
        total += r * spec.hausdorff_weight(&x);
    }
    total * nodes.volume
}

/// Computes and caches `Z_h` by stratified Monte Carlo over `[-h, h]^d`.
/// In position-weighted mode the cached value is the mean of the per-source
/// normalizers over `E`.
pub fn kernel_normalizer(spec: &mut KernelSpec) -> Result<f64> {
    let nodes = spec.nodes();
    let n = nodes.len();
    let values: Vec<f64> = if spec.position_weighted {
        let pts: Vec<Vec<f64>> = spec.e_sample.sample.points().map(<[f64]>::to_vec).collect();
        let s = &*spec;
        pts.par_iter().map(|y| position_norm(s, &nodes, y) / nodes.volume).collect()
    } else {
        let s = &*spec;
        (0..n).into_par_iter().map(|k| s.unnormalized(nodes.offset(k))).collect()
    };
    let m = values.len();
    let z = if spec.position_weighted {
        values.iter().sum::<f64>() * nodes.volume / m as f64
    } else {
        values.iter().sum::<f64>() * nodes.volume
    };
    if !(z > 0.0) || !z.is_finite() {
        return Err(SotxError::Internal(format!(
            "kernel normalizer is {z}; the kernel support B(0, h) misses E (h = {})",
            spec.h
        )));
    }
    let stderr = if spec.position_weighted {
        0.0
    } else {
        let mut batch = [0.0; BATCHES];
        for (k, v) in values.iter().enumerate() {
            batch[k % BATCHES] += v * nodes.volume * BATCHES as f64;
        }
        let mean = batch.iter().sum::<f64>() / BATCHES as f64;
        let var = batch.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
        (var / BATCHES as f64).sqrt()
    };
    if !spec.position_weighted {
        let d = spec.dim();
        let mut offsets = Vec::new();
        let mut masses = Vec::new();
        for (k, &v) in values.iter().enumerate() {
            if v > 0.0 {
                offsets.extend_from_slice(nodes.offset(k));
                masses.push(v * nodes.volume / z);
            }
        }
        spec.transfer = Some(Arc::new(Transfer { dim: d, offsets, masses }));
    }
    spec.z_h = Some(z);
    spec.z_h_stderr = Some(stderr);
    Ok(z)
}

/// Kernel value at offset `z` (literal convention).
pub fn kernel_eval(spec: &KernelSpec, z: &[f64]) -> Result<f64> {
    let zh = spec.z_h.ok_or_else(missing_normalizer)?;
    if spec.position_weighted {
        return Err(SotxError::Invalid(
            "position-weighted kernels depend on the source point; use KernelSpec::transfer".into(),
        ));
    }
    Ok(spec.unnormalized(z) / zh)
}

/// `∫ K_h` on fresh stratified nodes drawn with `seed`, independent of the
/// nodes that produced `Z_h`. Position-weighted kernels report the worst
/// per-source total instead.
pub fn kernel_integral(spec: &KernelSpec, seed: u64) -> Result<f64> {
    if spec.z_h.is_none() {
        return Err(missing_normalizer());
    }
    if spec.position_weighted {
        let mut worst: f64 = 1.0;
        for y in spec.e_sample.sample.points() {
            let mut total = 0.0;
            spec.transfer(y, |_, q| total += q)?;
            if (total - 1.0).abs() > (worst - 1.0).abs() {
                worst = total;
            }
        }
        return Ok(worst);
    }
    let nodes = Nodes::stratified(spec.dim(), spec.h, spec.quadrature.nodes, seed);
    let values: Vec<f64> = (0..nodes.len())
        .into_par_iter()
        .map(|k| spec.unnormalized(nodes.offset(k)))
        .collect();
    Ok(values.iter().sum::<f64>() * nodes.volume / spec.z_h.expect("checked"))
}

/// Regular grid with spacing `h / cells_per_h` covering `E + B(0, h)`.
pub fn covering_grid(part: &FractalPart, h: f64, cells_per_h: usize) -> Result<GridDensity> {
    if cells_per_h < 2 {
        return Err(SotxError::Invalid("smoothing grid needs at least 2 cells per bandwidth".into()));
    }
    let (lo, hi) = part
        .sample
        .bounding_box()
        .ok_or_else(|| SotxError::Invalid("empty fractal sample".into()))?;
    let spacing = h / cells_per_h as f64;
    let origin: Vec<f64> = lo.iter().map(|l| l - h - spacing).collect();
    let shape: Vec<usize> = lo
        .iter()
        .zip(&hi)
        .map(|(l, u)| ((u - l + 2.0 * h + 2.0 * spacing) / spacing).ceil() as usize)
        .collect();
    let cells = shape.iter().product();
    GridDensity::new(origin, vec![spacing; lo.len()], shape, vec![0.0; cells])
}

/// Smooths a fractal part with the kernel onto the cells of `grid` (whose
/// values are ignored). Cell values are the binned quadrature masses divided
/// by the cell volume, so mass is preserved up to rounding.
pub fn fractal_smooth(part: &FractalPart, spec: &KernelSpec, grid: &GridDensity) -> Result<GridDensity> {
    if grid.max_spacing() > spec.h / 2.0 {
        return Err(SotxError::Invalid(format!(
            "grid spacing {} exceeds h/2 = {}; kernel undersampled",
            grid.max_spacing(),
            spec.h / 2.0
        )));
    }
    if let Some((lo, hi)) = part.sample.bounding_box() {
        let up = grid.upper();
        for k in 0..lo.len() {
            if lo[k] - spec.h < grid.origin[k] || hi[k] + spec.h > up[k] {
                return Err(SotxError::Invalid("grid does not cover E + B(0, h)".into()));
            }
        }
    }
    let pts: Vec<(Vec<f64>, f64)> = part
        .sample
        .points()
        .zip(&part.sample.weights)
        .map(|(p, &w)| (p.to_vec(), w))
        .collect();
    let partials: Vec<Result<BTreeMap<usize, f64>>> = pts
        .par_iter()
        .map(|(y, w)| {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            let mut lost = false;
            spec.transfer(y, |x, q| match grid.cell_of(x) {
                Some(c) => *acc.entry(c).or_insert(0.0) += w * q,
                None => lost = true,
            })?;
            if lost {
                return Err(SotxError::Internal("kernel mass fell outside the grid".into()));
            }
            Ok(acc)
        })
        .collect();
    let mut out = grid.clone();
    out.values.iter_mut().for_each(|v| *v = 0.0);
    let vol = grid.cell_volume();
    for partial in partials {
        for (c, m) in partial? {
            out.values[c] += m / vol;
        }
    }
    Ok(out)
}

/// Empirical lower-bound constant of `∫_{B(x,r)} f >= gamma r^ds` over
/// sample centres `x ∈ E` and the given radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H5Report {
    pub gamma: f64,
    pub radii: Vec<f64>,
    pub centers: usize,
    pub pass: bool,
}

pub fn h5_lower_bound(f: &GridDensity, part: &FractalPart, radii: &[f64], max_centers: usize) -> H5Report {
    let support = f.support_cloud();
    let index = BallIndex::new(&support);
    let n = part.sample.len();
    let stride = (n / max_centers.max(1)).max(1);
    let mut gamma = f64::INFINITY;
    let mut centers = 0;
    for i in (0..n).step_by(stride) {
        centers += 1;
        let x = part.sample.point(i);
        for &r in radii {
            gamma = gamma.min(index.ball_mass(x, r) / r.powf(part.ds));
        }
    }
    H5Report {
        gamma,
        radii: radii.to_vec(),
        centers,
        pass: gamma > 0.0 && gamma.is_finite(),
    }
}

/// `max_{x ∈ E} |(phi * K)(x) - phi(x)|` using the kernel quadrature.
pub fn approximate_identity_error(spec: &KernelSpec, phi: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in spec.e_sample.sample.points() {
        let mut conv = 0.0;
        // x - z for the literal convolution: mirror the transferred point
        spec.transfer(x, |p, q| {
            let mirrored: Vec<f64> = if spec.position_weighted {
                p.to_vec()
            } else {
                x.iter().zip(p).map(|(xi, pi)| 2.0 * xi - pi).collect()
            };
            conv += q * phi(&mirrored);
        })?;
        worst = worst.max((conv - phi(x)).abs());
    }
    Ok(worst)
}
