//! Randomized invariants over grids, fields and configurations.

use macproj::config::parse_config;
use macproj::verify::{mms_problem, random_grid};
use macproj::{
    fortin_interpolate, h1_norm, MacGrid, OperatorWorkspace, PressureField, Projector, RunConfig, Scheme, VelocityField,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_and_rng(seed: u64, dim: usize, max_cells: usize) -> (MacGrid, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_grid(&mut rng, dim, max_cells).unwrap();
    (g, rng)
}

fn velocity(g: &MacGrid, rng: &mut ChaCha8Rng, scale: f64) -> VelocityField {
    VelocityField::from_values(g, (0..g.num_faces()).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
}

fn pressure(g: &MacGrid, rng: &mut ChaCha8Rng, scale: f64) -> PressureField {
    PressureField { values: (0..g.num_cells()).map(|_| scale * rng.random_range(-1.0..1.0)).collect() }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn duality(seed in any::<u64>(), dim in 2usize..=3, log_scale in -4.0f64..4.0) {
        let (g, mut rng) = grid_and_rng(seed, dim, 7);
        let ops = OperatorWorkspace::new(&g);
        let s = 10f64.powf(log_scale);
        let p = pressure(&g, &mut rng, s);
        let v = velocity(&g, &mut rng, 1.0 / s);
        let lhs = ops.grad(&p).dot(&v, &g) + p.dot(&ops.div(&v), &g);
        prop_assert!(lhs.abs() <= 1e-12 * p.l2_norm(&g) * v.l2_norm(&g));
    }

    #[test]
    fn laplacian_energy(seed in any::<u64>(), dim in 2usize..=3) {
        let (g, mut rng) = grid_and_rng(seed, dim, 7);
        let ops = OperatorWorkspace::new(&g);
        let w = velocity(&g, &mut rng, 1.0);
        let h = h1_norm(&g, &w).powi(2);
        prop_assert!((ops.neg_laplace(&w).dot(&w, &g) - h).abs() <= 1e-12 * h);
    }

    #[test]
    fn convection_skew(seed in any::<u64>(), dim in 2usize..=3) {
        let (g, mut rng) = grid_and_rng(seed, dim, 6);
        let ops = OperatorWorkspace::new(&g);
        let a = Projector::new(&g, &ops).with_tolerance(1e-14).project(&velocity(&g, &mut rng, 3.0)).unwrap();
        let w = velocity(&g, &mut rng, 1.0);
        let b = ops.trilinear(&g, &a, &w, &w);
        prop_assert!(b.abs() <= 1e-12 * a.l2_norm(&g) * w.l2_norm(&g).powi(2));
    }

    #[test]
    fn projection_identities(seed in any::<u64>(), dim in 2usize..=3) {
        let (g, mut rng) = grid_and_rng(seed, dim, 6);
        let ops = OperatorWorkspace::new(&g);
        let proj = Projector::new(&g, &ops).with_tolerance(1e-13);
        let w = velocity(&g, &mut rng, 1.0);
        let d = proj.decompose(&w).unwrap();
        let n2 = w.l2_norm(&g).powi(2);
        let pyth = n2 - d.v.l2_norm(&g).powi(2) - ops.grad(&d.psi).l2_norm(&g).powi(2);
        prop_assert!(pyth.abs() <= 1e-11 * n2);
        let again = proj.project(&d.v).unwrap();
        prop_assert!(again.sub(&d.v).l2_norm(&g) <= 1e-11 * w.l2_norm(&g));
        prop_assert!(d.v.l2_norm(&g) <= w.l2_norm(&g) * (1.0 + 1e-14));
        prop_assert!(d.psi.integral(&g).abs() <= 1e-12 * d.psi.l2_norm(&g).max(1e-300));
    }

    #[test]
    fn fortin_preserves_polynomial_divergence(seed in any::<u64>(), dim in 2usize..=3) {
        // Unit-cube grids so the manufactured fields vanish on the walls.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let axes = (0..dim).map(|_| {
            let n = rng.random_range(2..=7usize);
            let mut x: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.02..0.98)).collect();
            x.sort_by(f64::total_cmp);
            x.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let mut nodes = vec![0.0];
            nodes.extend(x);
            nodes.push(1.0);
            nodes
        }).collect();
        let g = MacGrid::new(axes).unwrap();
        let p = mms_problem(if dim == 2 { "poly2d" } else { "poly3d" }).unwrap();
        let v = fortin_interpolate(&g, &|x| p.velocity(0.0, x));
        let ops = OperatorWorkspace::new(&g);
        let div = ops.div(&v);
        let scale = v.max_abs() / g.h();
        prop_assert!(div.max_abs() <= 1e-12 * scale, "{} vs {}", div.max_abs(), scale);
    }

    #[test]
    fn energy_inequality_on_random_runs(seed in any::<u64>(), steps in 1usize..=4) {
        let (g, mut rng) = grid_and_rng(seed, 2, 6);
        let s = Scheme::new(&g);
        let c = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let f = move |t: f64, x: [f64; 3]| [c[0] * (x[1] + t).cos(), c[1] * x[0] * x[0], 0.0];
        let (traj, _) = s.run(&|x| [x[1].sin(), x[0].cos(), 0.0], &f, 0.5, steps).unwrap();
        for d in &traj.steps {
            prop_assert!(d.energy_residual >= -1e-9 * d.energy_scale);
            prop_assert!(d.div_max <= 1e-9);
            prop_assert!(d.pressure_mean.abs() <= 1e-12 * d.pressure_norm.max(1e-300));
        }
    }

    #[test]
    fn config_roundtrip(n in 1usize..1000, t in 1e-3f64..1e3, cells in proptest::collection::vec(2usize..50, 2..=3),
                        tol in 1e-14f64..0.5, seed in any::<u64>(), every in 0usize..10) {
        let dim = cells.len();
        let c = RunConfig {
            grid: macproj::GridSpec::Uniform { extent: vec![t.sqrt(); dim], cells },
            horizon: t,
            steps: n,
            problem: macproj::ProblemSpec::ConstantForce(vec![t; dim]),
            poisson_tolerance: tol,
            seed,
            output_every: every,
            ..RunConfig::default()
        };
        prop_assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }
}
