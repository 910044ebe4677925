use serde::{Deserialize, Serialize};

use crate::cloud::WeightedCloud;
use crate::error::{Result, SotxError};

/// Piecewise-constant density on a regular axis-aligned grid. Values are mass
/// per unit volume, stored row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let d = origin.len();
        if d == 0 || spacing.len() != d || shape.len() != d {
            return Err(SotxError::Invalid(
                "grid origin, spacing and shape must share a positive dimension".into(),
            ));
        }
        if spacing.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(SotxError::Invalid("grid spacing must be positive".into()));
        }
        let cells: usize = shape.iter().product();
        if cells == 0 || values.len() != cells {
            return Err(SotxError::Invalid(format!(
                "grid expects {cells} values, got {}",
                values.len()
            )));
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(SotxError::NegativeWeight {
                value: v,
                context: "grid density".into(),
            });
        }
        Ok(Self {
            origin,
            spacing,
            shape,
            values,
        })
    }

    /// Builds a grid of `cells` cells per axis over the box `[lo, hi]`,
    /// sampling `f` at cell centres.
    pub fn from_fn(lo: &[f64], hi: &[f64], cells: &[usize], f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let spacing: Vec<f64> = (0..lo.len())
            .map(|k| (hi[k] - lo[k]) / cells[k] as f64)
            .collect();
        let mut g = Self::new(
            lo.to_vec(),
            spacing,
            cells.to_vec(),
            vec![0.0; cells.iter().product()],
        )?;
        let mut c = vec![0.0; lo.len()];
        for i in 0..g.values.len() {
            g.center_into(i, &mut c);
            g.values[i] = f(&c).max(0.0);
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = lin % self.shape[k];
            lin /= self.shape[k];
        }
        idx
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn center_into(&self, lin: usize, out: &mut [f64]) {
        let mut rem = lin;
        for k in (0..self.dim()).rev() {
            let i = rem % self.shape[k];
            rem /= self.shape[k];
            out[k] = self.origin[k] + (i as f64 + 0.5) * self.spacing[k];
        }
    }

    pub fn center(&self, lin: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        self.center_into(lin, &mut c);
        c
    }

    /// Upper corner of the grid box.
    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.origin[k] + self.shape[k] as f64 * self.spacing[k])
            .collect()
    }

    /// Cell containing `x`, if inside the grid box.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut lin = 0;
        for k in 0..self.dim() {
            let t = (x[k] - self.origin[k]) / self.spacing[k];
            if !(t >= 0.0) || t >= self.shape[k] as f64 {
                return None;
            }
            lin = lin * self.shape[k] + t.floor() as usize;
        }
        Some(lin)
    }

    /// Piecewise-constant lookup; zero outside the grid.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.cell_of(x).map(|i| self.values[i]).unwrap_or(0.0)
    }

    /// Multilinear interpolation between cell centres, clamped to the
    /// outermost centres inside the box and zero outside it.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        if self.cell_of(x).is_none() {
            return 0.0;
        }
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let t = (x[k] - self.origin[k]) / self.spacing[k] - 0.5;
            let n = self.shape[k];
            if n == 1 || t <= 0.0 {
                base[k] = 0;
                frac[k] = 0.0;
            } else if t >= (n - 1) as f64 {
                base[k] = n - 2;
                frac[k] = 1.0;
            } else {
                base[k] = t.floor() as usize;
                frac[k] = t - t.floor();
            }
        }
        let mut total = 0.0;
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                if self.shape[k] == 1 {
                    if bit == 1 {
                        w = 0.0;
                    }
                    idx[k] = 0;
                    continue;
                }
                idx[k] = base[k] + bit;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if w > 0.0 {
                total += w * self.values[self.linear_index(&idx)];
            }
        }
        total
    }

    /// Cell centres with positive density, weighted by cell mass.
    pub fn support_cloud(&self) -> WeightedCloud {
        let vol = self.cell_volume();
        let d = self.dim();
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let mut c = vec![0.0; d];
        for (i, &v) in self.values.iter().enumerate() {
            if v > 0.0 {
                self.center_into(i, &mut c);
                coords.extend_from_slice(&c);
                weights.push(v * vol);
            }
        }
        WeightedCloud {
            dim: d,
            coords,
            weights,
        }
    }

    /// Smallest positive density value.
    pub fn floor(&self) -> Option<f64> {
        self.values
            .iter()
            .cloned()
            .filter(|v| *v > 0.0)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }

    pub fn ceiling(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Minimum distance between the closed supports (unions of positive
    /// cells) of two grids.
    pub fn support_gap(&self, other: &GridDensity) -> f64 {
        let a = self.support_boxes();
        let b = other.support_boxes();
        let mut best = f64::INFINITY;
        for (alo, ahi) in &a {
            for (blo, bhi) in &b {
                let mut s = 0.0;
                for k in 0..alo.len() {
                    let gap = (blo[k] - ahi[k]).max(alo[k] - bhi[k]).max(0.0);
                    s += gap * gap;
                }
                best = best.min(s);
            }
        }
        best.sqrt()
    }

    fn support_boxes(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let half: Vec<f64> = self.spacing.iter().map(|s| 0.5 * s).collect();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, _)| {
                let c = self.center(i);
                let lo = c.iter().zip(&half).map(|(c, h)| c - h).collect();
                let hi = c.iter().zip(&half).map(|(c, h)| c + h).collect();
                (lo, hi)
            })
            .collect()
    }

    /// Support bounding box `(lo, hi)` of the positive cells.
    pub fn support_bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let boxes = self.support_boxes();
        if boxes.is_empty() {
            return None;
        }
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for (l, h) in boxes {
            for k in 0..d {
                lo[k] = lo[k].min(l[k]);
                hi[k] = hi[k].max(h[k]);
            }
        }
        Some((lo, hi))
    }

    /// Midpoint resampling onto `resolution` cells per axis over the same box.
    /// The result is rescaled so its mass equals the input mass.
    pub fn resample(&self, resolution: usize) -> Result<GridDensity> {
        if resolution < 2 {
            return Err(SotxError::Invalid("resolution must be at least 2".into()));
        }
        let lo = self.origin.clone();
        let hi = self.upper();
        let cells = vec![resolution; self.dim()];
        let mut out = GridDensity::from_fn(&lo, &hi, &cells, |x| self.value_at(x))?;
        let (m_in, m_out) = (self.mass(), out.mass());
        if m_out > 0.0 {
            let s = m_in / m_out;
            out.values.iter_mut().for_each(|v| *v *= s);
        } else if m_in > 0.0 {
            return Err(SotxError::Invalid(
                "resampling resolution misses every positive cell".into(),
            ));
        }
        Ok(out)
    }
}
