//! Flat weighted point clouds and a sweep-line ball index over them.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SotxError};

/// Points stored row-major in one buffer, each carrying a nonnegative weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedCloud {
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(SotxError::Invalid("cloud dimension must be positive".into()));
        }
        if coords.len() != dim * weights.len() {
            return Err(SotxError::Invalid(format!(
                "cloud has {} coordinates for {} weights in dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        if let Some(&w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(SotxError::NegativeWeight {
                value: w,
                context: "weighted cloud".into(),
            });
        }
        Ok(Self {
            dim,
            coords,
            weights,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn from_points(points: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(1);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(SotxError::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        Self::new(dim, points.concat(), weights)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Appends `other`, which must share the dimension.
    pub fn extend(&mut self, other: &WeightedCloud) -> Result<()> {
        if other.is_empty() {
            return Ok(());
        }
        if self.is_empty() {
            self.dim = other.dim;
        } else if other.dim != self.dim {
            return Err(SotxError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        self.coords.extend_from_slice(&other.coords);
        self.weights.extend_from_slice(&other.weights);
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            coords: self.coords.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }

    /// Applies `f` to every point, keeping weights.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut dim = self.dim;
        for p in self.points() {
            let q = f(p);
            dim = q.len();
            coords.extend(q);
        }
        Self {
            dim,
            coords,
            weights: self.weights.clone(),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`; `None` when empty.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }

    pub fn diameter_bound(&self) -> f64 {
        match self.bounding_box() {
            Some((lo, hi)) => dist(&lo, &hi),
            None => 0.0,
        }
    }
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Closed-ball queries over a fixed point set. Points are sorted along the
/// first axis and a query scans the slab `|x_0 - z_0| <= r`.
#[derive(Debug, Clone)]
pub struct BallIndex {
    dim: usize,
    keys: Vec<f64>,
    coords: Vec<f64>,
    weights: Vec<f64>,
    original: Vec<usize>,
}

impl BallIndex {
    pub fn new(cloud: &WeightedCloud) -> Self {
        let dim = cloud.dim;
        let mut order: Vec<usize> = (0..cloud.len()).collect();
        order.sort_by(|&a, &b| {
            cloud.point(a)[0]
                .total_cmp(&cloud.point(b)[0])
                .then(a.cmp(&b))
        });
        let mut coords = Vec::with_capacity(cloud.coords.len());
        let mut weights = Vec::with_capacity(cloud.len());
        let mut keys = Vec::with_capacity(cloud.len());
        for &i in &order {
            let p = cloud.point(i);
            keys.push(p[0]);
            coords.extend_from_slice(p);
            weights.push(cloud.weights[i]);
        }
        Self {
            dim,
            keys,
            coords,
            weights,
            original: order,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    #[inline]
    fn slab(&self, z0: f64, r: f64) -> std::ops::Range<usize> {
        let lo = self.keys.partition_point(|&k| k < z0 - r);
        let hi = self.keys.partition_point(|&k| k <= z0 + r);
        lo..hi
    }

    /// Sum of weights within the closed ball `B(z, r)`.
    pub fn ball_mass(&self, z: &[f64], r: f64) -> f64 {
        let r2 = r * r;
        let mut total = 0.0;
        for s in self.slab(z[0], r) {
            let p = &self.coords[s * self.dim..(s + 1) * self.dim];
            if dist2(p, z) <= r2 {
                total += self.weights[s];
            }
        }
        total
    }

    /// Whether any indexed point lies within the closed ball `B(z, r)`.
    pub fn any_within(&self, z: &[f64], r: f64) -> bool {
        let r2 = r * r;
        self.slab(z[0], r)
            .any(|s| dist2(&self.coords[s * self.dim..(s + 1) * self.dim], z) <= r2)
    }

    /// Original indices of the points within `B(z, r)`, in ascending order.
    pub fn within(&self, z: &[f64], r: f64) -> Vec<usize> {
        let r2 = r * r;
        let mut out: Vec<usize> = self
            .slab(z[0], r)
            .filter(|&s| dist2(&self.coords[s * self.dim..(s + 1) * self.dim], z) <= r2)
            .map(|s| self.original[s])
            .collect();
        out.sort_unstable();
        out
    }

    /// Nearest indexed point to `z`: `(original index, distance)`.
    pub fn nearest(&self, z: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let start = self.keys.partition_point(|&k| k < z[0]);
        let mut best = (usize::MAX, f64::INFINITY);
        let consider = |s: usize, best: &mut (usize, f64)| {
            let d = dist2(&self.coords[s * self.dim..(s + 1) * self.dim], z);
            let idx = self.original[s];
            if d < best.1 || (d == best.1 && idx < best.0) {
                *best = (idx, d);
            }
        };
        for s in start..self.len() {
            let dk = self.keys[s] - z[0];
            if dk * dk > best.1 {
                break;
            }
            consider(s, &mut best);
        }
        for s in (0..start).rev() {
            let dk = z[0] - self.keys[s];
            if dk * dk > best.1 {
                break;
            }
            consider(s, &mut best);
        }
        Some((best.0, best.1.sqrt()))
    }

    /// Smallest distance from each point to another distinct point, reduced
    /// by the median. Returns 0 for fewer than two points.
    pub fn median_nearest_spacing(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let mut spacings: Vec<f64> = (0..n)
            .map(|s| {
                let p = &self.coords[s * self.dim..(s + 1) * self.dim];
                let mut best = f64::INFINITY;
                for t in (s + 1)..n {
                    let dk = self.keys[t] - p[0];
                    if dk * dk > best {
                        break;
                    }
                    let d = dist2(&self.coords[t * self.dim..(t + 1) * self.dim], p);
                    if d > 0.0 {
                        best = best.min(d);
                    }
                }
                for t in (0..s).rev() {
                    let dk = p[0] - self.keys[t];
                    if dk * dk > best {
                        break;
                    }
                    let d = dist2(&self.coords[t * self.dim..(t + 1) * self.dim], p);
                    if d > 0.0 {
                        best = best.min(d);
                    }
                }
                best.sqrt()
            })
            .filter(|d| d.is_finite())
            .collect();
        if spacings.is_empty() {
            return 0.0;
        }
        spacings.sort_by(f64::total_cmp);
        spacings[spacings.len() / 2]
    }
}

/// Minimum distance between two point sets.
pub fn set_distance(a: &WeightedCloud, b: &WeightedCloud) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let index = BallIndex::new(b);
    a.points()
        .map(|p| index.nearest(p).map(|(_, d)| d).unwrap_or(f64::INFINITY))
        .fold(f64::INFINITY, f64::min)
}
