use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sotx_core::cloud::WeightedCloud;
use sotx_core::fractalgeo::generate_cantor;
use sotx_core::measures::{GridDensity, Sign};
use sotx_core::partition::{assign_regions, build_potentials, AmbientPotentials, PartitionLabels, PartitionParams};
use sotx_core::presets::{random_signed_atoms, AffineGaussian1d};
use sotx_core::transport::{
    build_block_problem, extract_map, solve_exact, Block, CostSpec, CustomPenalty, TransportMap, TransportProblem,
    DEFAULT_CAP,
};
use sotx_core::measures::discretize;
use sotx_core::verify::*;

struct Solved {
    pot: AmbientPotentials,
    map: TransportMap,
    labels: PartitionLabels,
}

fn solve(p: &TransportProblem) -> Solved {
    let (plan, duals) = solve_exact(p, DEFAULT_CAP).unwrap();
    let pot = build_potentials(&duals, p);
    let map = extract_map(&plan, p);
    let labels = assign_regions(&pot, &map, &PartitionParams::default()).unwrap();
    Solved { pot, map, labels }
}

fn gaussian_problem(g: &AffineGaussian1d, inter: bool) -> (GridDensity, GridDensity, Solved) {
    let (f, t) = (g.source_grid().unwrap(), g.target_grid().unwrap());
    let e = WeightedCloud::empty(1);
    let cost = CostSpec::quadratic(0.5).unwrap();
    let p = if inter {
        TransportProblem::from_clouds(f.support_cloud(), e.clone(), e, t.support_cloud(), &cost).unwrap()
    } else {
        TransportProblem::from_clouds(f.support_cloud(), e.clone(), t.support_cloud(), e, &cost).unwrap()
    };
    let s = solve(&p);
    (f, t, s)
}

#[test]
fn uniform_linear_map_has_zero_residual() {
    let n = 20;
    let f = GridDensity::from_fn(&[0.0], &[1.0], &[n], |_| 1.0).unwrap();
    let h = 1.0 / n as f64;
    // uniform[0,2] on a grid offset by half a cell; edge cells are half covered
    let mut vals = vec![0.5; 2 * n + 1];
    vals[0] = 0.25;
    vals[2 * n] = 0.25;
    let g = GridDensity::new(vec![-0.5 * h], vec![h], vec![2 * n + 1], vals).unwrap();
    let e = WeightedCloud::empty(1);
    let p = TransportProblem::from_clouds(f.support_cloud(), e.clone(), g.support_cloud(), e, &CostSpec::quadratic(0.5).unwrap()).unwrap();
    let s = solve(&p);
    let r = ma_residual_intra(&s.pot, &s.map, &f, &g, &s.labels, Sign::Plus).unwrap();
    assert!(r.max < 1e-9, "{}", r.max);
    assert_eq!(r.values.len(), n - 4);
}

#[test]
fn gaussian_intra_residual_decays() {
    let fields: Vec<ResidualField> = [20, 40, 80, 160]
        .iter()
        .map(|&c| {
            let (f, t, s) = gaussian_problem(&AffineGaussian1d::standard(c), false);
            ma_residual_intra(&s.pot, &s.map, &f, &t, &s.labels, Sign::Plus).unwrap()
        })
        .collect();
    for r in refinement_ratios(&fields) {
        assert!(r >= 1.7, "{r}");
    }
}

#[test]
fn mismatched_target_density_is_detected() {
    let g = AffineGaussian1d::standard(80);
    let (f, t, s) = gaussian_problem(&g, false);
    let good = ma_residual_intra(&s.pot, &s.map, &f, &t, &s.labels, Sign::Plus).unwrap();
    let wrong = AffineGaussian1d { scale: 3.0, ..g }.target_grid().unwrap();
    let bad = ma_residual_intra(&s.pot, &s.map, &f, &wrong, &s.labels, Sign::Plus).unwrap();
    assert!(bad.max > 0.1 && bad.max > 50.0 * good.max, "{} vs {}", bad.max, good.max);
}

#[test]
fn intra_residual_needs_region_points() {
    let g = AffineGaussian1d::standard(20);
    let (f, t, s) = gaussian_problem(&g, false);
    assert!(ma_residual_intra(&s.pot, &s.map, &f, &t, &s.labels, Sign::Minus).is_err());
}

#[test]
fn analytic_implicit_equation_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for alpha in [0.0, 0.5, 1.0, 3.0] {
        let cost = CostSpec::quadratic(alpha).unwrap();
        for d in 1..=3 {
            for _ in 0..50 {
                let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
                // psi(y) = |y|^2 / 2 so grad psi(T) = T, and T(x) = x solves the equation
                let r = implicit_equation_residual(&x, &x, &x, &cost).unwrap();
                assert!(r <= 1e-12);
            }
        }
    }
}

#[test]
fn inter_sign_residual_decays() {
    let mut prev = f64::INFINITY;
    for cells in [20, 40, 80, 160] {
        let (f, t, s) = gaussian_problem(&AffineGaussian1d::standard(cells), true);
        let r = ma_residual_inter(&s.pot, &s.map, &f, &t, &s.labels, Block::PM, None).unwrap();
        assert_eq!(r.nonsmooth, 0);
        assert!(r.determinant.max < prev, "{} !< {prev}", r.determinant.max);
        assert!(r.implicit.max < 0.05);
        prev = r.determinant.max;
    }
    assert!(prev < 1e-3);
}

#[test]
fn inter_residual_rejects_intra_block() {
    let (f, t, s) = gaussian_problem(&AffineGaussian1d::standard(20), true);
    assert!(ma_residual_inter(&s.pot, &s.map, &f, &t, &s.labels, Block::PP, None).is_err());
}

#[test]
fn sign_condition_table() {
    for (d, alpha, want) in [(2, 0.5, 4.0), (3, 0.0, 1.0), (1, 1.0, 3.0)] {
        assert_eq!(sign_condition(d, &CostSpec::quadratic(alpha).unwrap()).unwrap(), want);
    }
    for d in 1..=3 {
        for alpha in [0.0, 0.5, 1.0] {
            let v = sign_condition(d, &CostSpec::quadratic(alpha).unwrap()).unwrap();
            assert_eq!(v, (1.0 + 2.0 * alpha).powi(d as i32));
            assert!(v > 0.0);
        }
    }
}

fn custom(hess_xy: bool) -> CostSpec {
    CostSpec::custom(CustomPenalty {
        name: "scaled".into(),
        value: Arc::new(|x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>()),
        eigenbounds: (2.0, 2.0),
        grad_y: None,
        hess_yy: None,
        hess_xy: hess_xy.then(|| -> Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync> {
            Arc::new(|x: &[f64], _: &[f64]| {
                let d = x.len();
                (0..d * d).map(|k| if k % (d + 1) == 0 { -2.0 } else { 0.0 }).collect()
            })
        }),
    })
    .unwrap()
}

#[test]
fn sign_condition_for_custom_penalties() {
    assert!(sign_condition(2, &custom(false)).is_err());
    // lambda = |x - y|^2 matches alpha = 1
    assert!((sign_condition(2, &custom(true)).unwrap() - 9.0).abs() < 1e-12);
    assert!((sign_condition(3, &custom(true)).unwrap() - 27.0).abs() < 1e-12);
}

#[test]
fn legendre_pure_positive_is_classical() {
    let xs = WeightedCloud::new(1, vec![0.0, 0.4, 1.1, 1.5, 2.2], vec![1.0; 5]).unwrap();
    let ys = WeightedCloud::new(1, vec![0.2, 0.9, 1.0, 2.0, 2.1], vec![1.0; 5]).unwrap();
    let e = WeightedCloud::empty(1);
    let p = TransportProblem::from_clouds(xs, e.clone(), ys, e, &CostSpec::quadratic(0.5).unwrap()).unwrap();
    let s = solve(&p);
    let r = legendre_system_residual(&s.pot);
    assert!(r.max_residual() <= 1e-9);
    assert!(r.pass);
}

#[test]
fn legendre_residual_on_random_signed_instances_and_perturbation() {
    for seed in 0..5 {
        let (mu, nu) = random_signed_atoms(20, 2, seed).unwrap();
        let p = build_block_problem(&discretize(&mu, None).unwrap(), &discretize(&nu, None).unwrap(), &CostSpec::quadratic(0.5).unwrap()).unwrap();
        let s = solve(&p);
        let r = legendre_system_residual(&s.pot);
        assert!(r.max_residual() <= 1e-6 * r.scale, "{r:?}");
        let (_, changes) = legendre_iterate(&s.pot.duals, &p, 2);
        assert!(changes.iter().all(|c| *c <= 1e-9), "{changes:?}");
        for j in [0, 7, 25] {
            for amount in [1e-3, -1e-3] {
                let bad = legendre_system_residual(&perturb_target_dual(&s.pot, j, amount));
                assert!(bad.max_residual() >= 0.9e-3, "seed {seed} j {j}: {}", bad.max_residual());
                assert!(!bad.pass);
            }
        }
    }
}

fn cantor(depth: u32) -> sotx_core::measures::FractalPart {
    generate_cantor(depth, (0.0, 1.0), 1.0).unwrap()
}

fn images(e: &sotx_core::measures::FractalPart, t: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
    e.sample.points().map(|x| vec![t(x[0])]).collect()
}

#[test]
fn preservation_identity_and_affine() {
    let e = cantor(8);
    let opts = PreservationOptions::default();
    let id = fractal_preservation_report(&e, &images(&e, |x| x), &opts).unwrap();
    assert_eq!(id.d_hat_image.d_hat, id.d_hat_source.d_hat);
    let l = id.lipschitz.as_ref().unwrap();
    assert_eq!((l.min, l.max), (1.0, 1.0));
    assert!(id.pass, "{id:?}");

    let aff = fractal_preservation_report(&e, &images(&e, |x| 2.0 * x + 1.0), &opts).unwrap();
    assert!((aff.d_hat_image.d_hat - aff.d_hat_source.d_hat).abs() < 1e-9);
    let l = aff.lipschitz.as_ref().unwrap();
    assert!((l.min - 2.0).abs() < 1e-12 && (l.max - 2.0).abs() < 1e-12);
    let (src, img) = (aff.ahlfors_source.as_ref().unwrap(), aff.ahlfors_image.as_ref().unwrap());
    assert!(img.pass);
    // ball masses at radius 2r match those at r, so constants scale by 2^-ds
    assert!((img.c_upper / src.c_upper - 2f64.powf(-e.ds)).abs() < 0.05);
}

#[test]
fn preservation_bi_lipschitz_quantiles_within_constants() {
    let e = cantor(9);
    // T' = 1 + 0.5 cos(2x) lies in [1 + 0.5 cos 2, 1.5] on [0, 1]
    let (ell, gamma) = (1.0 + 0.5 * 2f64.cos(), 1.5);
    let r = fractal_preservation_report(&e, &images(&e, |x| x + 0.25 * (2.0 * x).sin()), &PreservationOptions::default()).unwrap();
    let l = r.lipschitz.unwrap();
    assert!(l.lower >= 0.95 * ell && l.upper <= 1.05 * gamma, "{l:?}");
    assert!(r.dimension_pass);
}

#[test]
fn degenerate_image_fails() {
    let e = cantor(8);
    let r = fractal_preservation_report(&e, &images(&e, |_| 0.5), &PreservationOptions::default()).unwrap();
    assert_eq!(r.d_hat_image.d_hat, 0.0);
    assert!(!r.pass);
    assert!(fractal_preservation_report(&e, &images(&e, |_| 0.5)[..3], &PreservationOptions::default()).is_err());
}
