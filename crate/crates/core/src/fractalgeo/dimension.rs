use std::collections::HashSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{BallIndex, WeightedCloud};
use crate::error::{Result, SotxError};
use crate::measures::FractalPart;

/// Sample weights within the closed ball `B(z, r)`.
pub fn local_measure(e: &FractalPart, z: &[f64], r: f64) -> f64 {
    BallIndex::new(&e.sample).ball_mass(z, r)
}

/// Extremal ratios `H(E ∩ B(x, r)) / r^ds` over sampled centres and scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhlforsReport {
    pub c_lower: f64,
    pub c_upper: f64,
    pub scales: Vec<f64>,
    pub excluded_scales: Vec<f64>,
    pub max_ratio: f64,
    pub pass: bool,
}

impl AhlforsReport {
    /// `C_E = max(c_upper, 1 / c_lower)`.
    pub fn constant(&self) -> f64 {
        self.c_upper.max(1.0 / self.c_lower)
    }

    pub fn spread(&self) -> f64 {
        self.c_upper / self.c_lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhlforsOptions {
    pub centers: usize,
    pub seed: u64,
    /// Largest accepted `c_upper / c_lower`.
    pub max_ratio: f64,
}

impl Default for AhlforsOptions {
    fn default() -> Self {
        Self {
            centers: 200,
            seed: 0,
            max_ratio: 8.0,
        }
    }
}

/// Powers of two within `[lo, hi]`, descending.
pub fn dyadic_scales(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(lo > 0.0) || !(hi >= lo) {
        return out;
    }
    let mut k = hi.log2().floor() as i32;
    loop {
        let s = 2f64.powi(k);
        if s < lo {
            break;
        }
        if s <= hi {
            out.push(s);
        }
        k -= 1;
    }
    out
}

/// Estimates the Ahlfors constants of `e` in dimension `ds`. Scales below
/// three times the median nearest-neighbour spacing, or at least the
/// diameter, are excluded.
pub fn ahlfors_constants(e: &FractalPart, ds: f64, scales: &[f64], opts: &AhlforsOptions) -> Result<AhlforsReport> {
    let index = BallIndex::new(&e.sample);
    let finest = 3.0 * index.median_nearest_spacing();
    let diam = e.sample.diameter_bound();
    let (kept, excluded): (Vec<f64>, Vec<f64>) = scales.iter().partition(|&&r| r >= finest && r < diam);
    if kept.is_empty() {
        return Err(SotxError::Invalid(format!(
            "no usable Ahlfors scales in [{finest:.3e}, {diam:.3e})"
        )));
    }
    let n = e.sample.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut centers: Vec<usize> = if opts.centers >= n {
        (0..n).collect()
    } else {
        sample(&mut rng, n, opts.centers).into_vec()
    };
    centers.sort_unstable();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &c in &centers {
        let x = e.sample.point(c);
        for &r in &kept {
            let ratio = index.ball_mass(x, r) / r.powf(ds);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    Ok(AhlforsReport {
        c_lower: lo,
        c_upper: hi,
        scales: kept,
        excluded_scales: excluded,
        max_ratio: opts.max_ratio,
        pass: lo > 0.0 && hi / lo <= opts.max_ratio,
    })
}

const SHIFTS: usize = 4;

/// Least-squares fit of `log N(eps)` against `log(1/eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    pub d_hat: f64,
    pub scales: Vec<f64>,
    pub counts: Vec<f64>,
    pub fit_r2: f64,
    #[serde(default)]
    pub degenerate: bool,
}

/// Scale range `[4 x median spacing, diam / 8]` used when none is given.
pub fn default_scale_range(cloud: &WeightedCloud) -> (f64, f64) {
    let spacing = BallIndex::new(cloud).median_nearest_spacing();
    (4.0 * spacing, cloud.diameter_bound() / 8.0)
}

/// Box-counting dimension from dyadic boxes anchored at the bounding-box
/// corner of the cloud. Counts are geometric means over `SHIFTS` diagonal
/// offsets of the anchor within one box.
pub fn box_counting_dimension(cloud: &WeightedCloud, scale_range: (f64, f64)) -> Result<DimensionFit> {
    let distinct = match cloud.bounding_box() {
        Some((lo, hi)) => lo.iter().zip(&hi).any(|(a, b)| b > a),
        None => false,
    };
    if !distinct {
        return Ok(DimensionFit {
            d_hat: 0.0,
            scales: Vec::new(),
            counts: Vec::new(),
            fit_r2: 0.0,
            degenerate: true,
        });
    }
    let scales = dyadic_scales(scale_range.0, scale_range.1);
    if scales.len() < 4 {
        return Err(SotxError::Invalid(format!(
            "box counting needs at least 4 dyadic scales in [{:.3e}, {:.3e}]",
            scale_range.0, scale_range.1
        )));
    }
    let (lo, _) = cloud.bounding_box().expect("non-empty");
    let counts: Vec<f64> = scales
        .iter()
        .map(|&eps| {
            // geometric mean over diagonal shifts of the anchor by eps/SHIFTS
            let mut log_sum = 0.0;
            for k in 0..SHIFTS {
                let off = eps * k as f64 / SHIFTS as f64;
                let mut boxes: HashSet<Vec<i64>> = HashSet::new();
                for p in cloud.points() {
                    boxes.insert(p.iter().zip(&lo).map(|(x, l)| ((x - l + off) / eps).floor() as i64).collect());
                }
                log_sum += (boxes.len() as f64).ln();
            }
            (log_sum / SHIFTS as f64).exp()
        })
        .collect();
    let xs: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|c| c.ln()).collect();
    let (slope, r2) = linear_fit(&xs, &ys);
    Ok(DimensionFit {
        d_hat: slope.clamp(0.0, cloud.dim as f64),
        scales,
        counts,
        fit_r2: r2,
        degenerate: false,
    })
}

/// Ordinary least squares slope and coefficient of determination.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, r2)
}
