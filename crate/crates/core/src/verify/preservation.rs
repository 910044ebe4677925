use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{dist, BallIndex, WeightedCloud};
use crate::error::{Result, SotxError};
use crate::fractalgeo::{
    ahlfors_constants, box_counting_dimension, default_scale_range, dyadic_scales, AhlforsOptions, AhlforsReport,
    DimensionFit,
};
use crate::measures::FractalPart;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationOptions {
    pub ds_tolerance: f64,
    /// Accepted pairs for the ratio quantiles.
    pub pairs: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_range: Option<(f64, f64)>,
    pub ahlfors: AhlforsOptions,
}

impl Default for PreservationOptions {
    fn default() -> Self {
        Self {
            ds_tolerance: 0.1,
            pairs: 20_000,
            seed: 0,
            scale_range: None,
            ahlfors: AhlforsOptions::default(),
        }
    }
}

/// Distribution of `|T(x) - T(y)| / |x - y|` over sampled pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRatios {
    /// `l_hat`, the 1st percentile.
    pub lower: f64,
    /// `Gamma_hat`, the 99th percentile.
    pub upper: f64,
    pub min: f64,
    pub max: f64,
    pub pairs: usize,
    /// Accepted `|x - y|` band.
    pub band: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub ds: f64,
    pub d_hat_source: DimensionFit,
    pub d_hat_image: DimensionFit,
    pub ahlfors_source: Option<AhlforsReport>,
    pub ahlfors_image: Option<AhlforsReport>,
    pub lipschitz: Option<LipschitzRatios>,
    pub dimension_pass: bool,
    pub ahlfors_pass: bool,
    pub lipschitz_pass: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let t = pos - lo as f64;
    sorted[lo] * (1.0 - t) + sorted[hi] * t
}

fn ahlfors_of(part: &FractalPart, opts: &AhlforsOptions) -> Result<AhlforsReport> {
    let spacing = BallIndex::new(&part.sample).median_nearest_spacing();
    let scales = dyadic_scales(spacing, part.sample.diameter_bound());
    ahlfors_constants(part, part.ds, &scales, opts)
}

fn ratios(e: &WeightedCloud, image: &WeightedCloud, opts: &PreservationOptions) -> Option<LipschitzRatios> {
    let n = e.len();
    if n < 2 {
        return None;
    }
    let lo = 3.0 * BallIndex::new(e).median_nearest_spacing();
    let hi = 0.5 * e.diameter_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(opts.pairs);
    let mut attempts = 0usize;
    while out.len() < opts.pairs && attempts < 50 * opts.pairs {
        attempts += 1;
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let d = dist(e.point(i), e.point(j));
        if i == j || d < lo || d > hi {
            continue;
        }
        out.push(dist(image.point(i), image.point(j)) / d);
    }
    if out.is_empty() {
        return None;
    }
    out.sort_by(f64::total_cmp);
    Some(LipschitzRatios {
        lower: quantile(&out, 0.01),
        upper: quantile(&out, 0.99),
        min: out[0],
        max: out[out.len() - 1],
        pairs: out.len(),
        band: (lo, hi),
    })
}

/// Dimension, Ahlfors regularity and bi-Lipschitz ratio checks for the
/// image `images[k] = T(x_k)` of a fractal sample. The ball-in-image
/// inclusion is represented by the lower ratio quantile.
pub fn fractal_preservation_report(e: &FractalPart, images: &[Vec<f64>], opts: &PreservationOptions) -> Result<PreservationReport> {
    if images.len() != e.sample.len() {
        return Err(SotxError::Invalid(format!(
            "{} images for {} sample points",
            images.len(),
            e.sample.len()
        )));
    }
    if images.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SotxError::Invalid("map image has non-finite coordinates".into()));
    }
    let image_cloud = WeightedCloud::from_points(images, e.sample.weights.clone())?;
    let mut notes = Vec::new();
    let source_range = opts.scale_range.unwrap_or_else(|| default_scale_range(&e.sample));
    let d_hat_source = box_counting_dimension(&e.sample, source_range)?;
    let d_hat_image = box_counting_dimension(&image_cloud, default_scale_range(&image_cloud))?;
    let ahlfors_source = ahlfors_of(e, &opts.ahlfors)
        .map_err(|err| notes.push(format!("source Ahlfors check: {err}")))
        .ok();
    let image_part = if d_hat_image.degenerate {
        None
    } else {
        Some(FractalPart::new(image_cloud.clone(), e.ds, e.density_bounds, format!("{}:image", e.label))?)
    };
    let ahlfors_image = image_part.as_ref().and_then(|part| {
        ahlfors_of(part, &opts.ahlfors)
            .map_err(|err| notes.push(format!("image Ahlfors check: {err}")))
            .ok()
    });
    let lipschitz = if d_hat_image.degenerate { None } else { ratios(&e.sample, &image_cloud, opts) };
    let dimension_pass = !d_hat_image.degenerate && (d_hat_image.d_hat - e.ds).abs() <= opts.ds_tolerance;
    let ahlfors_pass = ahlfors_image.as_ref().is_some_and(|a| a.pass);
    let lipschitz_pass = lipschitz.as_ref().is_some_and(|l| l.lower > 0.0 && l.lower <= l.upper);
    if d_hat_image.degenerate {
        notes.push("degenerate image".into());
    }
    Ok(PreservationReport {
        ds: e.ds,
        d_hat_source,
        d_hat_image,
        ahlfors_source,
        ahlfors_image,
        lipschitz,
        dimension_pass,
        ahlfors_pass,
        lipschitz_pass,
        pass: dimension_pass && ahlfors_pass && lipschitz_pass,
        notes,
    })
}
