use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::BallIndex;
use crate::error::{Result, SotxError};
use crate::measures::{GridDensity, Sign};
use crate::partition::{AmbientPotentials, PartitionLabels, Region};
use crate::transport::{Block, CostSpec, TransportMap};

/// Densities below this are treated as zero when dividing.
pub const DENSITY_FLOOR: f64 = 1e-12;
/// Stencil margin, in cells, around residual points.
const MARGIN: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualField {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub spacing: Vec<f64>,
    /// Points skipped (vanishing density or non-unique argmin).
    pub excluded: usize,
}

impl ResidualField {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>, spacing: Vec<f64>, excluded: usize) -> Self {
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mean = if values.is_empty() {
            0.0
        } else {
            values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64
        };
        Self {
            points,
            values,
            max,
            mean,
            spacing,
            excluded,
        }
    }
}

/// Ratios of successive max-norms, coarse to fine.
pub fn refinement_ratios(fields: &[ResidualField]) -> Vec<f64> {
    fields.windows(2).map(|w| w[0].max / w[1].max).collect()
}

/// Grid cells whose centre is a source support point of sign `sign`, paired
/// with that point's global index.
fn cell_sources(pot: &AmbientPotentials, grid: &GridDensity, sign: Sign) -> Vec<Option<usize>> {
    let p = &pot.problem;
    let cloud = p.source_cloud(sign);
    if cloud.is_empty() {
        return vec![None; grid.len()];
    }
    let index = BallIndex::new(cloud);
    let tol = 1e-9 * grid.max_spacing();
    (0..grid.len())
        .map(|lin| {
            if !(grid.values[lin] > 0.0) {
                return None;
            }
            let c = grid.center(lin);
            match index.nearest(&c) {
                Some((k, d)) if d <= tol => Some(p.source_global(sign, k)),
                _ => None,
            }
        })
        .collect()
}

/// Cells with the full `MARGIN` neighbourhood inside the grid and inside
/// `region`.
fn interior_cells(grid: &GridDensity, owners: &[Option<usize>], labels: &PartitionLabels, region: Region) -> Vec<usize> {
    let d = grid.dim();
    let in_region = |lin: usize| owners[lin].is_some_and(|g| labels.labels.get(g) == Some(&region));
    let m = MARGIN as isize;
    (0..grid.len())
        .filter(|&lin| {
            if !in_region(lin) {
                return false;
            }
            let idx = grid.multi_index(lin);
            if (0..d).any(|k| idx[k] < MARGIN || idx[k] + MARGIN >= grid.shape[k]) {
                return false;
            }
            // every cell of the (2 MARGIN + 1)^d box must be in the region
            let side = 2 * m + 1;
            (0..side.pow(d as u32)).all(|code| {
                let mut rest = code;
                let mut nb = idx.clone();
                for k in 0..d {
                    let off = rest % side - m;
                    rest /= side;
                    nb[k] = (nb[k] as isize + off) as usize;
                }
                in_region(grid.linear_index(&nb))
            })
        })
        .collect()
}

/// Central-difference Hessian of `f` at `x` with per-axis steps.
fn cd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], step: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let f0 = f(x);
    let mut h = DMatrix::zeros(d, d);
    let shifted = |moves: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(k, s) in moves {
            y[k] += s;
        }
        f(&y)
    };
    for a in 0..d {
        let (sa, ha) = (step[a], step[a]);
        h[(a, a)] = (shifted(&[(a, sa)]) - 2.0 * f0 + shifted(&[(a, -sa)])) / (ha * ha);
        for b in (a + 1)..d {
            let sb = step[b];
            let v = (shifted(&[(a, sa), (b, sb)]) - shifted(&[(a, sa), (b, -sb)]) - shifted(&[(a, -sa), (b, sb)])
                + shifted(&[(a, -sa), (b, -sb)]))
                / (4.0 * sa * sb);
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    h
}

fn check_grid_dim(pot: &AmbientPotentials, grids: &[&GridDensity]) -> Result<usize> {
    let d = pot.dim();
    if !(d == 1 || d == 2) {
        return Err(SotxError::Invalid(format!("Monge-Ampere residuals need d in {{1, 2}}, got {d}")));
    }
    for g in grids {
        if g.dim() != d {
            return Err(SotxError::DimensionMismatch {
                expected: d,
                found: g.dim(),
            });
        }
    }
    Ok(d)
}

/// Residual of `det D^2 phi(x) = f(x) / g(grad phi(x))` on the interior of
/// the `sign`-to-`sign` region.
///
/// `grad phi` at a sample point is the realized image `T(x)`; it coincides
/// with the c-transform argmin wherever that argmin is unique.
pub fn ma_residual_intra(
    pot: &AmbientPotentials,
    map: &TransportMap,
    f: &GridDensity,
    g: &GridDensity,
    labels: &PartitionLabels,
    sign: Sign,
) -> Result<ResidualField> {
    check_grid_dim(pot, &[f, g])?;
    let region = Region::from_block(Block::new(sign, sign));
    let owners = cell_sources(pot, f, sign);
    let cells = interior_cells(f, &owners, labels, region);
    if cells.is_empty() {
        return Err(SotxError::Invalid(format!(
            "no interior {} points on the density grid",
            region.name()
        )));
    }
    let phi = |x: &[f64]| pot.phi_ambient(x);
    let rows: Vec<Option<(Vec<f64>, f64)>> = cells
        .par_iter()
        .map(|&lin| {
            let gi = owners[lin].expect("interior cells have owners");
            let x = f.center(lin);
            let t = map.image(gi);
            let gv = g.interpolate(t);
            if gv < DENSITY_FLOOR {
                return None;
            }
            let det = cd_hessian(&phi, &x, &f.spacing).determinant();
            Some((x, det - f.values[lin] / gv))
        })
        .collect();
    let excluded = rows.iter().filter(|r| r.is_none()).count();
    let (points, values) = rows.into_iter().flatten().unzip();
    Ok(ResidualField::new(points, values, f.spacing.clone(), excluded))
}

/// `|x - grad psi(t) - grad_y lambda(x, t)|` for a given gradient of `psi`
/// at `t`.
pub fn implicit_equation_residual(x: &[f64], t: &[f64], grad_psi_t: &[f64], cost: &CostSpec) -> Result<f64> {
    let gl = cost
        .grad_y_lambda(x, t)
        .ok_or_else(|| SotxError::Invalid("penalty has no grad_y callable".into()))?;
    Ok(x
        .iter()
        .zip(grad_psi_t)
        .zip(&gl)
        .map(|((xi, gi), li)| (xi - gi - li).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// `(-1)^d det(D^2_xy Λ̃)`. Quadratic penalties give `(1 + 2 alpha)^d`;
/// custom penalties are evaluated at `x = y = 0` and need a `hess_xy`
/// callable.
pub fn sign_condition(d: usize, cost: &CostSpec) -> Result<f64> {
    if d == 0 {
        return Err(SotxError::Invalid("dimension must be positive".into()));
    }
    if let Some(alpha) = cost.alpha() {
        return Ok((1.0 + 2.0 * alpha).powi(d as i32));
    }
    let zero = vec![0.0; d];
    let h = cost
        .hess_xy_lambda(&zero, &zero)
        .ok_or_else(|| SotxError::Invalid("custom penalty has no mixed second derivatives".into()))?;
    let full = h - DMatrix::identity(d, d);
    Ok(if d % 2 == 0 { 1.0 } else { -1.0 } * full.determinant())
}

/// Least-squares quadratic fit `q(y) = a + b.(y - c) + (y - c)^T H (y - c) / 2`
/// returning `(grad, hessian)` at the centre `c`.
fn quadratic_fit(center: &[f64], pts: &[(&[f64], f64)]) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let d = center.len();
    let n_quad = d * (d + 1) / 2;
    let cols = 1 + d + n_quad;
    if pts.len() < cols + 1 {
        return None;
    }
    let mut a = DMatrix::zeros(pts.len(), cols);
    let mut rhs = DVector::zeros(pts.len());
    for (r, (y, v)) in pts.iter().enumerate() {
        let z: Vec<f64> = y.iter().zip(center).map(|(a, b)| a - b).collect();
        a[(r, 0)] = 1.0;
        for k in 0..d {
            a[(r, 1 + k)] = z[k];
        }
        let mut c = 1 + d;
        for k in 0..d {
            for l in k..d {
                a[(r, c)] = if k == l { 0.5 * z[k] * z[k] } else { z[k] * z[l] };
                c += 1;
            }
        }
        rhs[r] = *v;
    }
    let sol = a.svd(true, true).solve(&rhs, 1e-12).ok()?;
    let grad = DVector::from_iterator(d, (0..d).map(|k| sol[1 + k]));
    let mut hess = DMatrix::zeros(d, d);
    let mut c = 1 + d;
    for k in 0..d {
        for l in k..d {
            hess[(k, l)] = sol[c];
            hess[(l, k)] = sol[c];
            c += 1;
        }
    }
    Some((grad, hess))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterResidual {
    pub block: Block,
    /// `|x - grad psi(T) - grad_y lambda(x, T)|`.
    pub implicit: ResidualField,
    /// `det(D^2 psi(T) + D^2_yy Λ̃ - I) - (g(T) / f(x)) (-1)^d det(D^2_xy Λ̃)`.
    pub determinant: ResidualField,
    pub fit_radius: f64,
    /// Points skipped because the c-transform argmin at `T(x)` is not unique.
    pub nonsmooth: usize,
}

/// Residuals of the inter-sign equations on the interior of `block`'s
/// region. `psi` near `T(x)` comes from a local quadratic fit of the target
/// potential over samples within `fit_radius` (default four target cells).
pub fn ma_residual_inter(
    pot: &AmbientPotentials,
    map: &TransportMap,
    f: &GridDensity,
    g: &GridDensity,
    labels: &PartitionLabels,
    block: Block,
    fit_radius: Option<f64>,
) -> Result<InterResidual> {
    let d = check_grid_dim(pot, &[f, g])?;
    if !block.is_inter() {
        return Err(SotxError::Invalid(format!("{} is not an inter-sign block", block.key())));
    }
    let p = &pot.problem;
    let cost = &p.cost;
    let probe = vec![0.0; d];
    if cost.grad_y_lambda(&probe, &probe).is_none()
        || cost.hess_yy_lambda(&probe, &probe).is_none()
        || cost.hess_xy_lambda(&probe, &probe).is_none()
    {
        return Err(SotxError::Invalid(
            "inter-sign residuals need penalty derivatives (grad_y, hess_yy, hess_xy)".into(),
        ));
    }
    let (s, t) = (block.source(), block.target());
    let radius = fit_radius.unwrap_or(4.0 * g.max_spacing());
    if !(radius > 0.0) {
        return Err(SotxError::Invalid("fit radius must be positive".into()));
    }
    let targets = p.target_cloud(t);
    if targets.is_empty() {
        return Err(SotxError::Invalid("target sign has no samples".into()));
    }
    let tindex = BallIndex::new(targets);
    let psi = pot.duals.psi_global();
    let phi = pot.duals.phi_global();
    let v_of = |local: usize| {
        let gj = p.target_global(t, local);
        let y = p.target_point(gj);
        0.5 * y.iter().map(|a| a * a).sum::<f64>() - psi[gj]
    };
    let owners = cell_sources(pot, f, s);
    let cells = interior_cells(f, &owners, labels, Region::from_block(block));
    if cells.is_empty() {
        return Err(SotxError::Invalid(format!(
            "no interior {} points on the density grid",
            block.region_name()
        )));
    }
    enum Row {
        Ok(Vec<f64>, f64, f64),
        Nonsmooth,
        Vanishing,
    }
    let rows: Vec<Row> = cells
        .par_iter()
        .map(|&lin| {
            let gi = owners[lin].expect("interior cells have owners");
            let x = f.center(lin);
            let y = map.image(gi).to_vec();
            // uniqueness of the source-side argmin defining psi at T(x)
            let (best, _) = pot.psi_tau_arg(t, &y);
            let tol = 1e-9 * (1.0 + best.abs());
            let ties = (0..p.n_sources())
                .filter(|&i| {
                    let b = Block::new(p.source_sign(i).0, t);
                    cost.block_cost(b, p.source_point(i), &y) - phi[i] <= best + tol
                })
                .count();
            if ties > 1 {
                return Row::Nonsmooth;
            }
            let gv = g.interpolate(&y);
            let fv = f.values[lin];
            if gv < DENSITY_FLOOR || fv < DENSITY_FLOOR {
                return Row::Vanishing;
            }
            let near = tindex.within(&y, radius);
            let vals: Vec<(&[f64], f64)> = near.iter().map(|&k| (targets.point(k), v_of(k))).collect();
            let Some((grad, hess)) = quadratic_fit(&y, &vals) else {
                return Row::Nonsmooth;
            };
            let gl = cost.grad_y_lambda(&x, &y).expect("checked");
            let implicit = (0..d).map(|k| (x[k] - grad[k] - gl[k]).powi(2)).sum::<f64>().sqrt();
            let hyy = cost.hess_yy_lambda(&x, &y).expect("checked");
            let hxy = cost.hess_xy_lambda(&x, &y).expect("checked") - DMatrix::identity(d, d);
            let parity = if d % 2 == 0 { 1.0 } else { -1.0 };
            let lhs = (hess + hyy).determinant();
            let rhs = gv / fv * parity * hxy.determinant();
            Row::Ok(x, implicit, lhs - rhs)
        })
        .collect();
    let mut pts = Vec::new();
    let mut implicit = Vec::new();
    let mut det = Vec::new();
    let (mut nonsmooth, mut vanishing) = (0, 0);
    for r in rows {
        match r {
            Row::Ok(x, a, b) => {
                pts.push(x);
                implicit.push(a);
                det.push(b);
            }
            Row::Nonsmooth => nonsmooth += 1,
            Row::Vanishing => vanishing += 1,
        }
    }
    let excluded = nonsmooth + vanishing;
    Ok(InterResidual {
        block,
        implicit: ResidualField::new(pts.clone(), implicit, f.spacing.clone(), excluded),
        determinant: ResidualField::new(pts, det, f.spacing.clone(), excluded),
        fit_radius: radius,
        nonsmooth,
    })
}
