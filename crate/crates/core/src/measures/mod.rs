//! Signed measures with an absolutely continuous, an atomic and a fractal
//! part on each sign, and their discretization to weighted clouds.

mod assumptions;
mod grid;

pub use assumptions::{check_assumptions, AssumptionReport, AssumptionThresholds, Flag};
pub use grid::GridDensity;

use serde::{Deserialize, Serialize};

use crate::cloud::{dist, WeightedCloud};
use crate::error::{Result, SotxError};

/// Relative tolerance for equal total mass of a transport pair.
pub const MASS_BALANCE_TOL: f64 = 1e-8;

/// Finitely many atoms with strictly positive masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSet {
    pub cloud: WeightedCloud,
}

impl AtomSet {
    pub fn new(cloud: WeightedCloud) -> Result<Self> {
        if let Some(&m) = cloud.weights.iter().find(|m| !(**m > 0.0)) {
            return Err(SotxError::NegativeWeight {
                value: m,
                context: "atom mass".into(),
            });
        }
        for i in 0..cloud.len() {
            for j in (i + 1)..cloud.len() {
                if dist(cloud.point(i), cloud.point(j)) == 0.0 {
                    return Err(SotxError::Invalid(format!("atoms {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { cloud })
    }

    pub fn from_points(points: &[Vec<f64>], masses: Vec<f64>) -> Result<Self> {
        Self::new(WeightedCloud::from_points(points, masses)?)
    }

    pub fn mass(&self) -> f64 {
        self.cloud.mass()
    }
}

/// Weighted sample of a Hausdorff measure on an Ahlfors-regular set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalPart {
    pub sample: WeightedCloud,
    pub ds: f64,
    pub density_bounds: (f64, f64),
    pub label: String,
}

impl FractalPart {
    pub fn new(sample: WeightedCloud, ds: f64, density_bounds: (f64, f64), label: impl Into<String>) -> Result<Self> {
        if !(ds > 0.0 && ds < sample.dim as f64) {
            return Err(SotxError::Invalid(format!(
                "fractal dimension {ds} outside (0, {})",
                sample.dim
            )));
        }
        if let Some(&w) = sample.weights.iter().find(|w| !(**w > 0.0)) {
            return Err(SotxError::NegativeWeight {
                value: w,
                context: "fractal sample weight".into(),
            });
        }
        let (m, big_m) = density_bounds;
        if !(m <= big_m) {
            return Err(SotxError::Invalid(format!("density bounds {m} > {big_m}")));
        }
        Ok(Self {
            sample,
            ds,
            density_bounds,
            label: label.into(),
        })
    }

    pub fn mass(&self) -> f64 {
        self.sample.mass()
    }

    pub fn dim(&self) -> usize {
        self.sample.dim
    }
}

/// One sign of a signed measure. `smoothed` holds the regularized fractal
/// part after the fractal kernel has been applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignedComponent {
    pub ac: Option<GridDensity>,
    pub atoms: Option<AtomSet>,
    pub fractal: Option<FractalPart>,
    pub smoothed: Option<GridDensity>,
}

/// Per-part masses of one sign.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PartMasses {
    pub ac: f64,
    pub atoms: f64,
    pub fractal: f64,
    pub smoothed: f64,
}

impl PartMasses {
    pub fn total(&self) -> f64 {
        self.ac + self.atoms + self.fractal + self.smoothed
    }
}

impl SignedComponent {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_ac(mut self, g: GridDensity) -> Self {
        self.ac = Some(g);
        self
    }

    pub fn with_atoms(mut self, a: AtomSet) -> Self {
        self.atoms = Some(a);
        self
    }

    pub fn with_fractal(mut self, f: FractalPart) -> Self {
        self.fractal = Some(f);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.ac.is_none() && self.atoms.is_none() && self.fractal.is_none() && self.smoothed.is_none()
    }

    pub fn masses(&self) -> PartMasses {
        PartMasses {
            ac: self.ac.as_ref().map_or(0.0, GridDensity::mass),
            atoms: self.atoms.as_ref().map_or(0.0, AtomSet::mass),
            fractal: self.fractal.as_ref().map_or(0.0, FractalPart::mass),
            smoothed: self.smoothed.as_ref().map_or(0.0, GridDensity::mass),
        }
    }

    fn dims(&self) -> Vec<usize> {
        let mut d = Vec::new();
        if let Some(g) = &self.ac {
            d.push(g.dim());
        }
        if let Some(a) = &self.atoms {
            d.push(a.cloud.dim);
        }
        if let Some(f) = &self.fractal {
            d.push(f.dim());
        }
        if let Some(g) = &self.smoothed {
            d.push(g.dim());
        }
        d
    }

    /// Absolutely continuous grids (the original density and the smoothed
    /// fractal part, when present).
    pub fn grids(&self) -> impl Iterator<Item = &GridDensity> {
        self.ac.iter().chain(self.smoothed.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// `plus - minus` on `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedMeasure {
    pub dim: usize,
    pub plus: SignedComponent,
    pub minus: SignedComponent,
    pub plus_masses: PartMasses,
    pub minus_masses: PartMasses,
}

/// Validates and assembles a signed measure, caching per-part masses.
pub fn build_signed_measure(plus: SignedComponent, minus: SignedComponent, dim: usize) -> Result<SignedMeasure> {
    if plus.is_empty() && minus.is_empty() {
        return Err(SotxError::EmptyMeasure);
    }
    for found in plus.dims().into_iter().chain(minus.dims()) {
        if found != dim {
            return Err(SotxError::DimensionMismatch { expected: dim, found });
        }
    }
    for comp in [&plus, &minus] {
        if let Some(a) = &comp.atoms {
            if let Some(&m) = a.cloud.weights.iter().find(|m| !(**m > 0.0)) {
                return Err(SotxError::NegativeWeight {
                    value: m,
                    context: "atom mass".into(),
                });
            }
        }
    }
    let plus_masses = plus.masses();
    let minus_masses = minus.masses();
    if !(plus_masses.total() + minus_masses.total() > 0.0) {
        return Err(SotxError::EmptyMeasure);
    }
    Ok(SignedMeasure {
        dim,
        plus,
        minus,
        plus_masses,
        minus_masses,
    })
}

impl SignedMeasure {
    pub fn component(&self, sign: Sign) -> &SignedComponent {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    pub fn signed_mass(&self) -> f64 {
        self.plus_masses.total() - self.minus_masses.total()
    }

    pub fn total_variation(&self) -> f64 {
        self.plus_masses.total() + self.minus_masses.total()
    }

    /// Multiplies every part by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<SignedMeasure> {
        let scale = |c: &SignedComponent| -> Result<SignedComponent> {
            let grid = |g: &GridDensity| {
                let mut g = g.clone();
                g.values.iter_mut().for_each(|v| *v *= factor);
                g
            };
            Ok(SignedComponent {
                ac: c.ac.as_ref().map(grid),
                atoms: c
                    .atoms
                    .as_ref()
                    .map(|a| AtomSet::new(a.cloud.scaled(factor)))
                    .transpose()?,
                fractal: c.fractal.as_ref().map(|f| FractalPart {
                    sample: f.sample.scaled(factor),
                    ..f.clone()
                }),
                smoothed: c.smoothed.as_ref().map(grid),
            })
        };
        build_signed_measure(scale(&self.plus)?, scale(&self.minus)?, self.dim)
    }
}

/// Checks that `mu` and `nu` carry equal signed mass and equal total
/// variation to `MASS_BALANCE_TOL`, returning `nu` rescaled so the total
/// variations agree exactly.
pub fn balance_pair(mu: &SignedMeasure, nu: &SignedMeasure) -> Result<SignedMeasure> {
    if mu.dim != nu.dim {
        return Err(SotxError::DimensionMismatch {
            expected: mu.dim,
            found: nu.dim,
        });
    }
    let scale = mu.total_variation().max(nu.total_variation());
    let signed_err = (mu.signed_mass() - nu.signed_mass()).abs() / scale;
    if signed_err > MASS_BALANCE_TOL {
        return Err(SotxError::MassImbalance {
            source_mass: mu.signed_mass(),
            target_mass: nu.signed_mass(),
            relative: signed_err,
        });
    }
    let tv_err = (mu.total_variation() - nu.total_variation()).abs() / scale;
    if tv_err > MASS_BALANCE_TOL {
        return Err(SotxError::MassImbalance {
            source_mass: mu.total_variation(),
            target_mass: nu.total_variation(),
            relative: tv_err,
        });
    }
    nu.scaled(mu.total_variation() / nu.total_variation())
}

/// Plus and minus clouds of one measure plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub plus: WeightedCloud,
    pub minus: WeightedCloud,
    /// Set when the grid resolution cannot resolve the plus/minus support gap
    /// (fewer than two cells).
    pub under_resolved: bool,
}

impl Discretized {
    pub fn cloud(&self, sign: Sign) -> &WeightedCloud {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }
}

/// Converts a signed measure to weighted clouds. Grids are resampled to
/// `resolution` cells per axis (native resolution when `None`) and become
/// cell centres weighted by cell mass; atoms and fractal samples pass
/// through.
pub fn discretize(m: &SignedMeasure, resolution: Option<usize>) -> Result<Discretized> {
    if let Some(r) = resolution {
        if r < 2 {
            return Err(SotxError::Invalid("resolution must be at least 2".into()));
        }
    }
    let mut max_cell: f64 = 0.0;
    let mut one = |c: &SignedComponent| -> Result<WeightedCloud> {
        let mut cloud = WeightedCloud::empty(m.dim);
        for g in c.grids() {
            let g = match resolution {
                Some(r) => g.resample(r)?,
                None => g.clone(),
            };
            max_cell = max_cell.max(g.max_spacing());
            cloud.extend(&g.support_cloud())?;
        }
        if let Some(a) = &c.atoms {
            cloud.extend(&a.cloud)?;
        }
        if let Some(f) = &c.fractal {
            cloud.extend(&f.sample)?;
        }
        Ok(cloud)
    };
    let plus = one(&m.plus)?;
    let minus = one(&m.minus)?;
    let mut under_resolved = false;
    for gp in m.plus.grids() {
        for gm in m.minus.grids() {
            if gp.support_gap(gm) < 2.0 * max_cell {
                under_resolved = true;
            }
        }
    }
    Ok(Discretized {
        plus,
        minus,
        under_resolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractalgeo::generate_cantor;

    fn uniform(lo: f64, hi: f64, cells: usize) -> GridDensity {
        GridDensity::from_fn(&[lo], &[hi], &[cells], |_| 1.0).unwrap()
    }

    #[test]
    fn single_atom_has_unit_mass() {
        let plus = SignedComponent::empty().with_atoms(AtomSet::from_points(&[vec![0.0]], vec![1.0]).unwrap());
        let m = build_signed_measure(plus, SignedComponent::empty(), 1).unwrap();
        assert_eq!(m.signed_mass(), 1.0);
    }

    #[test]
    fn symmetric_uniforms_cancel() {
        let plus = SignedComponent::empty().with_ac(uniform(0.0, 1.0, 10));
        let minus = SignedComponent::empty().with_ac(uniform(2.0, 3.0, 10));
        let m = build_signed_measure(plus, minus, 1).unwrap();
        assert!(m.signed_mass().abs() < 1e-12);
        assert!((m.total_variation() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn negative_atom_rejected() {
        let cloud = WeightedCloud {
            dim: 1,
            coords: vec![0.0],
            weights: vec![-1.0],
        };
        let plus = SignedComponent {
            atoms: Some(AtomSet { cloud }),
            ..Default::default()
        };
        assert!(matches!(
            build_signed_measure(plus, SignedComponent::empty(), 1),
            Err(SotxError::NegativeWeight { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_and_empty() {
        let plus = SignedComponent::empty().with_ac(uniform(0.0, 1.0, 4));
        assert!(matches!(
            build_signed_measure(plus, SignedComponent::empty(), 2),
            Err(SotxError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            build_signed_measure(SignedComponent::empty(), SignedComponent::empty(), 1),
            Err(SotxError::EmptyMeasure)
        ));
    }

    #[test]
    fn midpoint_discretization_of_uniform() {
        let plus = SignedComponent::empty().with_ac(uniform(0.0, 1.0, 10));
        let m = build_signed_measure(plus, SignedComponent::empty(), 1).unwrap();
        let d = discretize(&m, Some(4)).unwrap();
        assert_eq!(d.plus.len(), 4);
        for w in &d.plus.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert_eq!(d.plus.coords, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn atoms_pass_through() {
        let atoms = AtomSet::from_points(&[vec![0.5], vec![2.0]], vec![0.3, 0.7]).unwrap();
        let m = build_signed_measure(SignedComponent::empty().with_atoms(atoms.clone()), SignedComponent::empty(), 1).unwrap();
        let d = discretize(&m, Some(8)).unwrap();
        assert_eq!(d.plus, atoms.cloud);
    }

    #[test]
    fn cantor_depth_five_discretizes_to_32_points() {
        let part = generate_cantor(5, (0.0, 1.0), 1.0).unwrap();
        let m = build_signed_measure(SignedComponent::empty().with_fractal(part), SignedComponent::empty(), 1).unwrap();
        let d = discretize(&m, None).unwrap();
        assert_eq!(d.plus.len(), 32);
        assert!(d.plus.weights.iter().all(|w| (w - 1.0 / 32.0).abs() < 1e-15));
    }

    #[test]
    fn coarse_resolution_flags_gap() {
        let plus = SignedComponent::empty().with_ac(uniform(0.0, 1.0, 4));
        let minus = SignedComponent::empty().with_ac(uniform(1.1, 2.0, 4));
        let m = build_signed_measure(plus, minus, 1).unwrap();
        assert!(discretize(&m, Some(2)).unwrap().under_resolved);
        let plus = SignedComponent::empty().with_ac(uniform(0.0, 1.0, 40));
        let minus = SignedComponent::empty().with_ac(uniform(2.0, 3.0, 40));
        let m = build_signed_measure(plus, minus, 1).unwrap();
        assert!(!discretize(&m, None).unwrap().under_resolved);
    }

    #[test]
    fn balance_rescales_small_mismatch_and_rejects_large() {
        let mk = |mass: f64| {
            let atoms = AtomSet::from_points(&[vec![0.0]], vec![mass]).unwrap();
            build_signed_measure(SignedComponent::empty().with_atoms(atoms), SignedComponent::empty(), 1).unwrap()
        };
        let nu = balance_pair(&mk(1.0), &mk(1.0 + 1e-10)).unwrap();
        assert_eq!(nu.total_variation(), 1.0);
        assert!(matches!(balance_pair(&mk(1.0), &mk(1.1)), Err(SotxError::MassImbalance { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn discretize_preserves_part_masses(
                vals in proptest::collection::vec(0.0f64..5.0, 3..30),
                res in 2usize..64,
                atom_masses in proptest::collection::vec(0.01f64..3.0, 1..6),
            ) {
                prop_assume!(vals.iter().any(|v| *v > 0.1));
                let n = vals.len();
                let g = GridDensity::new(vec![0.0], vec![1.0 / n as f64], vec![n], vals).unwrap();
                let pts: Vec<Vec<f64>> = (0..atom_masses.len()).map(|i| vec![5.0 + i as f64]).collect();
                let atoms = AtomSet::from_points(&pts, atom_masses.clone()).unwrap();
                let m = build_signed_measure(
                    SignedComponent::empty().with_ac(g.clone()).with_atoms(atoms),
                    SignedComponent::empty(),
                    1,
                ).unwrap();
                let d = discretize(&m, Some(res));
                prop_assume!(d.is_ok());
                let d = d.unwrap();
                let total: f64 = d.plus.mass();
                let expect = g.mass() + atom_masses.iter().sum::<f64>();
                prop_assert!((total - expect).abs() <= 1e-9 * expect);
                let tail = &d.plus.weights[d.plus.len() - atom_masses.len()..];
                prop_assert_eq!(tail, &atom_masses[..]);
            }
        }
    }
}
