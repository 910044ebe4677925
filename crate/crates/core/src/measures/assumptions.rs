//! Diagnostics for the standing hypotheses H1 to H5.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{discretize, FractalPart, GridDensity, SignedMeasure};
use crate::cloud::WeightedCloud;
use crate::fractalgeo::{
    ahlfors_constants, covering_grid, dyadic_scales, fractal_smooth, h5_lower_bound, kernel_normalizer,
    AhlforsOptions, KernelSpec, QuadratureSpec, RhoSpec,
};
use crate::transport::{Block, CostSpec, Penalty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Pass,
    Fail,
    Unchecked,
}

impl Flag {
    fn from_bool(ok: bool) -> Flag {
        if ok {
            Flag::Pass
        } else {
            Flag::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionThresholds {
    /// Smallest acceptable AC density on its support.
    pub density_floor: f64,
    /// Smallest acceptable plus/minus AC support gap.
    pub min_support_gap: f64,
    /// Cost differences below this count as ties between atoms.
    pub tie_tolerance: f64,
    /// Allowed spread between fractal dimensions of different parts.
    pub ds_tolerance: f64,
    pub ahlfors: AhlforsOptions,
    /// Bandwidth used to smooth fractal parts for the H5 check. When unset,
    /// H5 is only checked on parts that already carry a smoothed density.
    pub h5_bandwidth: Option<f64>,
    /// Finite-difference samples for custom penalty eigenbounds.
    pub eigen_samples: usize,
    pub seed: u64,
}

impl Default for AssumptionThresholds {
    fn default() -> Self {
        Self {
            density_floor: 1e-12,
            min_support_gap: 0.0,
            tie_tolerance: 1e-12,
            ds_tolerance: 1e-9,
            ahlfors: AhlforsOptions::default(),
            h5_bandwidth: None,
            eigen_samples: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub density_floor: Option<f64>,
    pub density_ceiling: f64,
    pub support_gap_mu: Option<f64>,
    pub support_gap_nu: Option<f64>,
    pub penalty_eigenbounds: (f64, f64),
    pub measured_eigenbounds: (f64, f64),
    pub ds_values: Vec<f64>,
    pub atom_ties: usize,
    pub coincident_points: usize,
    pub h5_gamma: Option<f64>,
    pub pass_flags: BTreeMap<String, Flag>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn flag(&self, h: &str) -> Flag {
        self.pass_flags.get(h).copied().unwrap_or(Flag::Unchecked)
    }

    /// H3 and H4 failures abort a solve; the others only warn.
    pub fn hard_failure(&self) -> bool {
        self.flag("H3") == Flag::Fail || self.flag("H4") == Flag::Fail
    }
}

fn grids(m: &SignedMeasure) -> impl Iterator<Item = &GridDensity> {
    m.plus.ac.iter().chain(m.minus.ac.iter())
}

fn ac_gap(m: &SignedMeasure) -> Option<f64> {
    match (&m.plus.ac, &m.minus.ac) {
        (Some(a), Some(b)) => Some(a.support_gap(b)),
        _ => None,
    }
}

/// Atoms of both measures tagged by sign.
fn atoms(m: &SignedMeasure) -> Vec<(Vec<f64>, bool)> {
    let mut out = Vec::new();
    for (comp, plus) in [(&m.plus, true), (&m.minus, false)] {
        if let Some(a) = &comp.atoms {
            out.extend(a.cloud.points().map(|p| (p.to_vec(), plus)));
        }
    }
    out
}

const MAX_TIE_ATOMS: usize = 60;

/// Counts 2x2 swaps between atoms, involving opposite signs, whose block
/// costs tie to `tol`.
fn count_ties(mu: &SignedMeasure, nu: &SignedMeasure, cost: &CostSpec, tol: f64) -> Option<usize> {
    let src = atoms(mu);
    let tgt = atoms(nu);
    if src.len() > MAX_TIE_ATOMS || tgt.len() > MAX_TIE_ATOMS {
        return None;
    }
    let sign = |p: bool| if p { super::Sign::Plus } else { super::Sign::Minus };
    let c = |s: &(Vec<f64>, bool), t: &(Vec<f64>, bool)| cost.block_cost(Block::new(sign(s.1), sign(t.1)), &s.0, &t.0);
    let mut ties = 0;
    for i in 0..src.len() {
        for k in (i + 1)..src.len() {
            for j in 0..tgt.len() {
                for l in (j + 1)..tgt.len() {
                    if src[i].1 == src[k].1 && tgt[j].1 == tgt[l].1 {
                        continue;
                    }
                    let a = c(&src[i], &tgt[j]) + c(&src[k], &tgt[l]);
                    let b = c(&src[i], &tgt[l]) + c(&src[k], &tgt[j]);
                    if (a - b).abs() <= tol * (1.0 + a.abs()) {
                        ties += 1;
                    }
                }
            }
        }
    }
    Some(ties)
}

fn coincident(plus: &WeightedCloud, minus: &WeightedCloud) -> usize {
    if plus.is_empty() || minus.is_empty() {
        return 0;
    }
    let index = crate::cloud::BallIndex::new(minus);
    plus.points().filter(|p| index.any_within(p, 0.0)).count()
}

fn smoothed_h5(part: &FractalPart, smoothed: Option<&GridDensity>, h: Option<f64>, seed: u64) -> Option<f64> {
    let diam = part.sample.diameter_bound();
    let (grid, h) = match (smoothed, h) {
        (Some(g), _) => (g.clone(), 2.0 * g.max_spacing()),
        (None, Some(h)) => {
            let mut spec = KernelSpec::new(
                part.clone(),
                h,
                RhoSpec::default(),
                QuadratureSpec { nodes: 20_000, seed },
                false,
            )
            .ok()?;
            kernel_normalizer(&mut spec).ok()?;
            let grid = covering_grid(part, h, 2).ok()?;
            (fractal_smooth(part, &spec, &grid).ok()?, h)
        }
        (None, None) => return None,
    };
    let radii = dyadic_scales(h, diam.max(h));
    let radii = if radii.is_empty() { vec![h] } else { radii };
    Some(h5_lower_bound(&grid, part, &radii, 64).gamma)
}

/// Measures the quantities behind H1 to H5 for a transport pair. Failures
/// are reported in the flags, never raised.
pub fn check_assumptions(
    mu: &SignedMeasure,
    nu: &SignedMeasure,
    cost: &CostSpec,
    tol: &AssumptionThresholds,
) -> AssumptionReport {
    let mut flags = BTreeMap::new();
    let mut notes = Vec::new();

    // H1: density floor and ceiling of the AC parts
    let floor = grids(mu).chain(grids(nu)).filter_map(GridDensity::floor).reduce(f64::min);
    let ceiling = grids(mu).chain(grids(nu)).map(GridDensity::ceiling).fold(0.0, f64::max);
    flags.insert(
        "H1".to_string(),
        match floor {
            Some(f) => Flag::from_bool(f >= tol.density_floor && ceiling.is_finite()),
            None => Flag::Unchecked,
        },
    );
    notes.push("H1 boundary regularity of the supports is not checked".into());

    // H2: common fractal dimension and Ahlfors regularity
    let parts: Vec<&FractalPart> = [&mu.plus, &mu.minus, &nu.plus, &nu.minus]
        .iter()
        .filter_map(|c| c.fractal.as_ref())
        .collect();
    let mut ds_values: Vec<f64> = Vec::new();
    for p in &parts {
        if !ds_values.iter().any(|d| (d - p.ds).abs() <= tol.ds_tolerance) {
            ds_values.push(p.ds);
        }
    }
    flags.insert(
        "H2".to_string(),
        if parts.is_empty() {
            Flag::Unchecked
        } else {
            let mut ok = ds_values.len() == 1;
            for p in &parts {
                let scales = dyadic_scales(f64::MIN_POSITIVE, p.sample.diameter_bound());
                match ahlfors_constants(p, p.ds, &scales, &tol.ahlfors) {
                    Ok(r) if r.pass => {}
                    Ok(r) => {
                        ok = false;
                        notes.push(format!("H2: {} Ahlfors spread {:.3} too large", p.label, r.spread()));
                    }
                    Err(e) => {
                        ok = false;
                        notes.push(format!("H2: {}: {e}", p.label));
                    }
                }
            }
            Flag::from_bool(ok)
        },
    );

    // H3: uniform convexity of the penalty
    let eig = cost.eigenbounds();
    let measured = {
        let mut rng = ChaCha8Rng::seed_from_u64(tol.seed);
        let xs = discretize(mu, None).map(|d| {
            let mut c = d.plus;
            let _ = c.extend(&d.minus);
            c
        });
        let ys = discretize(nu, None).map(|d| {
            let mut c = d.plus;
            let _ = c.extend(&d.minus);
            c
        });
        match (xs, ys) {
            (Ok(xs), Ok(ys)) => cost.measured_eigenbounds(&xs, &ys, tol.eigen_samples, &mut rng),
            _ => eig,
        }
    };
    let h3 = match cost.penalty {
        Penalty::Quadratic { .. } => eig.0 > 0.0,
        Penalty::Custom(_) => {
            let slack = 1e-6 * (1.0 + eig.1.abs());
            eig.0 > 0.0 && measured.0 >= eig.0 - slack && measured.1 <= eig.1 + slack
        }
    };
    if !h3 {
        notes.push(format!(
            "H3: penalty Hessian bounds {:?} (measured {:?}) are not uniformly positive",
            eig, measured
        ));
    }
    flags.insert("H3".to_string(), Flag::from_bool(h3));

    // H4: separated supports and atoms in general position
    let gap_mu = ac_gap(mu);
    let gap_nu = ac_gap(nu);
    let mut h4 = true;
    for g in [gap_mu, gap_nu].into_iter().flatten() {
        if !(g > tol.min_support_gap) {
            h4 = false;
        }
    }
    let ties = count_ties(mu, nu, cost, tol.tie_tolerance);
    if ties.is_none() {
        notes.push(format!("H4: atom tie scan skipped (more than {MAX_TIE_ATOMS} atoms)"));
    }
    let ties = ties.unwrap_or(0);
    if ties > 0 {
        h4 = false;
        notes.push(format!("H4: {ties} atom cost ties"));
    }
    let mut coincident_points = 0;
    for m in [mu, nu] {
        if let Ok(d) = discretize(m, None) {
            coincident_points += coincident(&d.plus, &d.minus);
        }
    }
    if coincident_points > 0 {
        h4 = false;
        notes.push(format!("H4: {coincident_points} points carry both signs"));
    }
    flags.insert("H4".to_string(), Flag::from_bool(h4));

    // H5: lower mass bound of the smoothed fractal parts
    let mut gamma: Option<f64> = None;
    for comp in [&mu.plus, &mu.minus, &nu.plus, &nu.minus] {
        if let Some(p) = &comp.fractal {
            if let Some(g) = smoothed_h5(p, comp.smoothed.as_ref(), tol.h5_bandwidth, tol.seed) {
                gamma = Some(gamma.map_or(g, |a| a.min(g)));
            }
        }
    }
    flags.insert(
        "H5".to_string(),
        match gamma {
            Some(g) => Flag::from_bool(g > 0.0 && g.is_finite()),
            None => Flag::Unchecked,
        },
    );

    AssumptionReport {
        density_floor: floor,
        density_ceiling: ceiling,
        support_gap_mu: gap_mu,
        support_gap_nu: gap_nu,
        penalty_eigenbounds: eig,
        measured_eigenbounds: measured,
        ds_values,
        atom_ties: ties,
        coincident_points,
        h5_gamma: gamma,
        pass_flags: flags,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractalgeo::generate_cantor;
    use crate::measures::{build_signed_measure, AtomSet, SignedComponent};

    fn uniform(lo: f64, hi: f64) -> GridDensity {
        GridDensity::from_fn(&[lo], &[hi], &[20], |_| 1.0).unwrap()
    }

    fn pair(mu: SignedMeasure) -> AssumptionReport {
        check_assumptions(&mu, &mu, &CostSpec::quadratic(0.5).unwrap(), &AssumptionThresholds::default())
    }

    #[test]
    fn separated_supports_pass_h4() {
        let mu = build_signed_measure(
            SignedComponent::empty().with_ac(uniform(0.0, 1.0)),
            SignedComponent::empty().with_ac(uniform(2.0, 3.0)),
            1,
        )
        .unwrap();
        let r = pair(mu);
        assert_eq!(r.flag("H4"), Flag::Pass);
        assert!((r.support_gap_mu.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.flag("H1"), Flag::Pass);
        assert_eq!(r.flag("H2"), Flag::Unchecked);
    }

    #[test]
    fn overlapping_supports_fail_h4() {
        let mu = build_signed_measure(
            SignedComponent::empty().with_ac(uniform(0.0, 1.0)),
            SignedComponent::empty().with_ac(uniform(0.0, 1.0)),
            1,
        )
        .unwrap();
        let r = pair(mu);
        assert_eq!(r.flag("H4"), Flag::Fail);
        assert!(r.hard_failure());
    }

    #[test]
    fn quadratic_eigenbounds_are_exact() {
        let mu = build_signed_measure(SignedComponent::empty().with_ac(uniform(0.0, 1.0)), SignedComponent::empty(), 1).unwrap();
        let r = pair(mu.clone());
        assert_eq!(r.penalty_eigenbounds, (1.0, 1.0));
        assert_eq!(r.flag("H3"), Flag::Pass);
        let r0 = check_assumptions(&mu, &mu, &CostSpec::quadratic(0.0).unwrap(), &AssumptionThresholds::default());
        assert_eq!(r0.flag("H3"), Flag::Fail);
    }

    #[test]
    fn atom_ties_detected() {
        // symmetric square: swapping targets costs the same
        let mu = build_signed_measure(
            SignedComponent::empty().with_atoms(AtomSet::from_points(&[vec![0.0]], vec![1.0]).unwrap()),
            SignedComponent::empty().with_atoms(AtomSet::from_points(&[vec![2.0]], vec![1.0]).unwrap()),
            1,
        )
        .unwrap();
        let nu = build_signed_measure(
            SignedComponent::empty().with_atoms(AtomSet::from_points(&[vec![1.0]], vec![1.0]).unwrap()),
            SignedComponent::empty().with_atoms(AtomSet::from_points(&[vec![3.0]], vec![1.0]).unwrap()),
            1,
        )
        .unwrap();
        let cost = CostSpec::quadratic(0.5).unwrap();
        let r = check_assumptions(&mu, &nu, &cost, &AssumptionThresholds::default());
        assert_eq!(r.atom_ties, 0);
        assert_eq!(r.flag("H4"), Flag::Pass);
        let r = check_assumptions(&mu, &mu, &cost, &AssumptionThresholds::default());
        assert_eq!(r.atom_ties, 0);
        let nu_tie = build_signed_measure(
            SignedComponent::empty().with_atoms(AtomSet::from_points(&[vec![1.0]], vec![1.0]).unwrap()),
            SignedComponent::empty().with_atoms(AtomSet::from_points(&[vec![1.0]], vec![1.0]).unwrap()),
            1,
        )
        .unwrap();
        let r = check_assumptions(&mu, &nu_tie, &CostSpec::quadratic(0.0).unwrap(), &AssumptionThresholds::default());
        assert!(r.atom_ties > 0);
    }

    #[test]
    fn fractal_parts_check_h2_and_h5() {
        let e = generate_cantor(8, (0.0, 1.0), 1.0).unwrap();
        let mu = build_signed_measure(SignedComponent::empty().with_fractal(e), SignedComponent::empty(), 1).unwrap();
        let tol = AssumptionThresholds {
            h5_bandwidth: Some(0.05),
            ..Default::default()
        };
        let r = check_assumptions(&mu, &mu, &CostSpec::quadratic(0.5).unwrap(), &tol);
        assert_eq!(r.flag("H2"), Flag::Pass, "{:?}", r.notes);
        assert_eq!(r.flag("H5"), Flag::Pass);
        assert!(r.h5_gamma.unwrap() > 0.0);
    }
}
