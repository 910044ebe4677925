use crate::cloud::WeightedCloud;
use crate::error::{Result, SotxError};
use crate::measures::FractalPart;

/// `log 2 / log 3`.
pub const CANTOR_DIM: f64 = std::f64::consts::LN_2 / 1.098_612_288_668_109_8;
/// `log 3 / log 2`.
pub const SIERPINSKI_DIM: f64 = 1.098_612_288_668_109_8 / std::f64::consts::LN_2;

const MAX_CANTOR_DEPTH: u32 = 20;
const MAX_SIERPINSKI_DEPTH: u32 = 13;

/// Middle-thirds Cantor set on `[a, b]`: the centres of the `2^depth`
/// surviving intervals, each carrying `mass / 2^depth`.
pub fn generate_cantor(depth: u32, interval: (f64, f64), mass: f64) -> Result<FractalPart> {
    if depth == 0 || depth > MAX_CANTOR_DEPTH {
        return Err(SotxError::Invalid(format!(
            "cantor depth {depth} outside 1..={MAX_CANTOR_DEPTH}"
        )));
    }
    let (a, b) = interval;
    if !(b > a) || !(mass > 0.0) {
        return Err(SotxError::Invalid("cantor needs a < b and positive mass".into()));
    }
    let mut lefts = vec![a];
    let mut width = b - a;
    for _ in 0..depth {
        width /= 3.0;
        lefts = lefts.iter().flat_map(|&l| [l, l + 2.0 * width]).collect();
    }
    let n = lefts.len();
    let coords: Vec<f64> = lefts.iter().map(|l| l + 0.5 * width).collect();
    let sample = WeightedCloud::new(1, coords, vec![mass / n as f64; n])?;
    // Hausdorff measure of the Cantor set on [a, b] is (b - a)^ds.
    let density = mass / (b - a).powf(CANTOR_DIM);
    FractalPart::new(sample, CANTOR_DIM, (density, density), format!("cantor:depth={depth}"))
}

/// Sierpinski gasket on the triangle `(0,0), (1,0), (1/2, sqrt(3)/2)`: the
/// centroids of the `3^depth` sub-triangles with uniform weights.
pub fn generate_sierpinski(depth: u32, mass: f64) -> Result<FractalPart> {
    if depth == 0 || depth > MAX_SIERPINSKI_DEPTH {
        return Err(SotxError::Invalid(format!(
            "sierpinski depth {depth} outside 1..={MAX_SIERPINSKI_DEPTH}"
        )));
    }
    if !(mass > 0.0) {
        return Err(SotxError::Invalid("sierpinski needs positive mass".into()));
    }
    let h = 3f64.sqrt() / 2.0;
    // corners of each sub-triangle's lower-left vertex; all share the shape
    let mut corners = vec![(0.0, 0.0)];
    let mut side = 1.0;
    for _ in 0..depth {
        side /= 2.0;
        corners = corners
            .iter()
            .flat_map(|&(x, y)| [(x, y), (x + side, y), (x + 0.5 * side, y + h * side)])
            .collect();
    }
    let n = corners.len();
    let mut coords = Vec::with_capacity(2 * n);
    for (x, y) in corners {
        coords.push(x + 0.5 * side);
        coords.push(y + h * side / 3.0);
    }
    let sample = WeightedCloud::new(2, coords, vec![mass / n as f64; n])?;
    FractalPart::new(sample, SIERPINSKI_DIM, (mass, mass), format!("sierpinski:depth={depth}"))
}
