//! Randomized structural checks of the discrete operators.
//!
//! Every residual is divided by the natural Cauchy–Schwarz scale of its
//! inputs, so the thresholds do not depend on field magnitudes. A zero trial
//! gives `0 / 0`, which is reported as 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{h1_norm, PressureField, VelocityField};
use crate::grid::MacGrid;
use crate::operators::{ConvectionScheme, OperatorWorkspace};
use crate::projection::Projector;

/// Threshold for the operator identities.
const OPERATOR_TOL: f64 = 1e-12;
/// Threshold for identities that go through a Poisson solve.
const PROJECTION_TOL: f64 = 1e-11;
/// CG tolerance used to build divergence-free advecting fields.
const SOLVE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub max_residual: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Solver failure that prevented the check from running, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub trials: usize,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One line per check.
    pub fn summary(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let status = if c.passed { "PASS" } else { "FAIL" };
                match &c.error {
                    Some(e) => format!("{status} {:<22} error: {e}", c.name),
                    None => format!("{status} {:<22} max residual {:.3e} (threshold {:.0e})", c.name, c.max_residual, c.threshold),
                }
            })
            .collect()
    }
}

struct Tally {
    name: &'static str,
    threshold: f64,
    worst: f64,
    error: Option<String>,
}

impl Tally {
    fn new(name: &'static str, threshold: f64) -> Self {
        Self { name, threshold, worst: 0.0, error: None }
    }

    fn record(&mut self, value: f64, scale: f64) {
        let r = if scale > 0.0 { value.abs() / scale } else { value.abs() };
        // NaN must fail, so keep it instead of letting max() drop it.
        if r.is_nan() || r > self.worst {
            self.worst = r;
        }
    }

    fn record_result(&mut self, r: Result<(f64, f64)>) {
        match r {
            Ok((v, s)) => self.record(v, s),
            Err(e) => {
                self.error.get_or_insert_with(|| e.to_string());
            }
        }
    }

    fn finish(self) -> PropertyCheck {
        let passed = self.error.is_none() && self.worst <= self.threshold;
        PropertyCheck { name: self.name, max_residual: self.worst, threshold: self.threshold, passed, error: self.error }
    }
}

/// Magnitude drawn log-uniformly from `[1e-3, 1e3]`.
fn magnitude(rng: &mut ChaCha8Rng) -> f64 {
    10f64.powf(rng.random_range(-3.0..3.0))
}

fn random_velocity(grid: &MacGrid, rng: &mut ChaCha8Rng, zero: bool) -> VelocityField {
    if zero {
        return VelocityField::zeros(grid);
    }
    let s = magnitude(rng);
    VelocityField::from_values(grid, (0..grid.num_faces()).map(|_| s * rng.random_range(-1.0..1.0)).collect())
}

fn random_pressure(grid: &MacGrid, rng: &mut ChaCha8Rng, zero: bool) -> PressureField {
    if zero {
        return PressureField::zeros(grid);
    }
    let s = magnitude(rng);
    PressureField { values: (0..grid.num_cells()).map(|_| s * rng.random_range(-1.0..1.0)).collect() }
}

/// Random non-uniform grid with `2..=max_cells` cells per axis, random
/// extents in `[0.5, 2]` and cell widths varying by up to a factor 5.
pub fn random_grid<R: Rng>(rng: &mut R, dim: usize, max_cells: usize) -> Result<MacGrid> {
    let max_cells = max_cells.max(2);
    let axes = (0..dim)
        .map(|_| {
            let n = rng.random_range(2..=max_cells);
            let extent = rng.random_range(0.5..2.0);
            let widths: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = widths.iter().sum();
            let mut nodes = Vec::with_capacity(n + 1);
            let mut x = 0.0;
            nodes.push(0.0);
            for w in &widths[..n - 1] {
                x += extent * w / total;
                nodes.push(x);
            }
            nodes.push(extent);
            nodes
        })
        .collect();
    MacGrid::new(axes)
}

/// [`property_suite_with`] using the centered convection operator.
pub fn property_suite(grid: &MacGrid, trials: usize, seed: u64) -> PropertyReport {
    property_suite_with(grid, trials, seed, ConvectionScheme::Centered)
}

/// Runs `trials` randomized checks of duality, Laplacian symmetry and
/// energy, convection skew-symmetry, and the projection identities. Trial 0
/// uses all-zero fields.
pub fn property_suite_with(grid: &MacGrid, trials: usize, seed: u64, convection: ConvectionScheme) -> PropertyReport {
    let ops = OperatorWorkspace::new(grid);
    let projector = Projector::new(grid, &ops).with_tolerance(SOLVE_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut duality = Tally::new("duality", OPERATOR_TOL);
    let mut symmetry = Tally::new("laplacian_symmetry", OPERATOR_TOL);
    let mut energy = Tally::new("laplacian_energy", OPERATOR_TOL);
    let mut skew = Tally::new("convection_skew", OPERATOR_TOL);
    let mut idempotence = Tally::new("projection_idempotence", PROJECTION_TOL);
    let mut pythagoras = Tally::new("projection_pythagoras", PROJECTION_TOL);
    let mut gradient_star = Tally::new("gradient_star0", PROJECTION_TOL);

    for trial in 0..trials {
        let zero = trial == 0;
        let p = random_pressure(grid, &mut rng, zero);
        let v = random_velocity(grid, &mut rng, zero);
        let w = random_velocity(grid, &mut rng, zero);
        let a_raw = random_velocity(grid, &mut rng, zero);

        // ∫∇p·v + ∫p div v = 0.
        let lhs = ops.grad(&p).dot(&v, grid) + p.dot(&ops.div(&v), grid);
        duality.record(lhs, p.l2_norm(grid) * v.l2_norm(grid));

        // ∫(−Δv)·w = ∫v·(−Δw), and ∫(−Δw)·w = ‖w‖²_{1,2}.
        let hv = h1_norm(grid, &v);
        let hw = h1_norm(grid, &w);
        let sym = ops.neg_laplace(&v).dot(&w, grid) - v.dot(&ops.neg_laplace(&w), grid);
        symmetry.record(sym, hv * hw);
        energy.record(ops.neg_laplace(&w).dot(&w, grid) - hw * hw, hw * hw);

        // b(a, w, w) = 0 for div-free a.
        skew.record_result(projector.project(&a_raw).map(|a| {
            let m = ops.convection_matrix(grid, &a, convection);
            let cw = crate::linalg::matvec(&m, &w.values);
            let b: f64 = cw.iter().zip(&w.values).map(|(x, y)| x * y).sum();
            (b, a.l2_norm(grid) * w.l2_norm(grid).powi(2))
        }));

        // P(Pw) = Pw and ‖w‖² = ‖Pw‖² + ‖∇ψ‖².
        let split = projector.decompose(&w).and_then(|d| {
            let again = projector.project(&d.v)?;
            Ok((d.v.clone(), again, ops.grad(&d.psi)))
        });
        match split {
            Ok((pw, ppw, gpsi)) => {
                let nw = w.l2_norm(grid);
                idempotence.record(ppw.sub(&pw).l2_norm(grid), nw);
                let defect = nw * nw - pw.l2_norm(grid).powi(2) - gpsi.l2_norm(grid).powi(2);
                pythagoras.record(defect, nw * nw);
            }
            Err(e) => {
                let msg = e.to_string();
                idempotence.error.get_or_insert(msg.clone());
                pythagoras.error.get_or_insert(msg);
            }
        }

        // |∇q|_{*,0,N} = 0.
        let gq = ops.grad(&p);
        gradient_star.record_result(projector.star0_seminorm(&gq).map(|s| (s, gq.l2_norm(grid))));
    }

    PropertyReport {
        trials,
        checks: vec![
            duality.finish(),
            symmetry.finish(),
            energy.finish(),
            skew.finish(),
            idempotence.finish(),
            pythagoras.finish(),
            gradient_star.finish(),
        ],
    }
}
