use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use macproj::verify::mms_problem;
use macproj::{MacGrid, OperatorWorkspace, Projector, Scheme, VelocityField};

fn uniform(n: usize, dim: usize) -> MacGrid {
    let axis: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    MacGrid::new(vec![axis; dim]).unwrap()
}

fn noisy(grid: &MacGrid) -> VelocityField {
    // Cheap deterministic pseudo-random fill.
    let values = (0..grid.num_faces()).map(|f| ((f as f64 * 12.9898).sin() * 43758.5453).fract()).collect();
    VelocityField::from_values(grid, values)
}

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operators");
    for (n, dim) in [(64, 2), (16, 3)] {
        let g = uniform(n, dim);
        group.bench_with_input(BenchmarkId::new("assemble", format!("{n}^{dim}")), &g, |b, g| b.iter(|| OperatorWorkspace::new(black_box(g))));
        let ops = OperatorWorkspace::new(&g);
        let w = noisy(&g);
        group.bench_with_input(BenchmarkId::new("neg_laplace", format!("{n}^{dim}")), &w, |b, w| b.iter(|| ops.neg_laplace(black_box(w))));
    }
    group.finish();
}

fn projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("projection");
    group.sample_size(20);
    for (n, dim) in [(64, 2), (16, 3)] {
        let g = uniform(n, dim);
        let ops = OperatorWorkspace::new(&g);
        let proj = Projector::new(&g, &ops);
        let w = noisy(&g);
        group.bench_with_input(BenchmarkId::new("poisson", format!("{n}^{dim}")), &w, |b, w| b.iter(|| proj.project(black_box(w)).unwrap()));
    }
    group.finish();
}

fn scheme_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("scheme");
    group.sample_size(10);
    for (n, dim, name) in [(32, 2, "poly2d"), (12, 3, "poly3d")] {
        let g = uniform(n, dim);
        let p = mms_problem(name).unwrap();
        let scheme = Scheme::new(&g);
        let dt = 1.0 / 32.0;
        let (state, _) = scheme.initialize(&|x| p.velocity(0.0, x), dt).unwrap();
        let f = scheme.forcing_at(&|t, x| p.forcing(t, x), 0.5 * dt);
        group.bench_function(BenchmarkId::new("step", format!("{n}^{dim}")), |b| b.iter(|| scheme.step(black_box(&state), &f).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, operators, projection, scheme_step);
criterion_main!(benches);
