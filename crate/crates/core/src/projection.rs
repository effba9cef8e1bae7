//! Discrete Helmholtz–Leray decomposition.
//!
//! Any `w` with zero exterior values splits uniquely as `w = v + ∇_N ψ` with
//! `div_N v = 0` and `ψ` of zero mean; `v` is the `L²`-orthogonal projection
//! of `w` onto the discretely divergence-free fields `E_N`.

use crate::error::Result;
use crate::field::{PressureField, VelocityField};
use crate::grid::MacGrid;
use crate::linalg::{matvec, solve_spd, SolveStats, SolverKind, SparseSystem, DEFAULT_TOLERANCE};
use crate::operators::OperatorWorkspace;

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Divergence-free part.
    pub v: VelocityField,
    /// Mean-zero potential.
    pub psi: PressureField,
    pub stats: SolveStats,
}

/// Projector onto `E_N` bound to a grid and its operators.
pub struct Projector<'a> {
    pub grid: &'a MacGrid,
    pub ops: &'a OperatorWorkspace,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl<'a> Projector<'a> {
    pub fn new(grid: &'a MacGrid, ops: &'a OperatorWorkspace) -> Self {
        Self { grid, ops, tolerance: DEFAULT_TOLERANCE, max_iterations: crate::linalg::DEFAULT_MAX_ITERATIONS }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    /// Solves `∫∇ψ·∇ξ = ∫w·∇ξ` for all `ξ`, i.e. the integrated Neumann
    /// problem `−div_N ∇_N ψ = −div_N w`, and returns `(w − ∇ψ, ψ)`.
    pub fn decompose(&self, w: &VelocityField) -> Result<Decomposition> {
        let (psi, stats) = self.potential(w, None)?;
        let v = w.sub(&self.ops.grad(&psi));
        Ok(Decomposition { v, psi, stats })
    }

    /// Potential `ψ` of the gradient part of `w`, optionally warm-started.
    pub(crate) fn potential(&self, w: &VelocityField, guess: Option<&PressureField>) -> Result<(PressureField, SolveStats)> {
        // Integrated rhs: −|K| div_K w. Its entries sum to zero by
        // telescoping, up to rounding in the face fluxes |σ| w_σ.
        let flux: f64 = w.values.iter().enumerate().map(|(f, v)| (self.grid.face_area(f) * v).abs()).sum();
        let div = matvec(&self.ops.div, &w.values);
        let rhs: Vec<f64> = div.iter().zip(&self.ops.cell_volume).map(|(d, v)| -d * v).collect();
        let mut sys = SparseSystem::new(self.ops.poisson.clone(), rhs, SolverKind::ConjugateGradient)
            .with_tolerance(self.tolerance)
            .with_nullspace(self.ops.cell_volume.clone())
            .with_rhs_scale(2.0 * flux);
        sys.max_iterations = self.max_iterations;
        if let Some(g) = guess {
            sys = sys.with_initial_guess(g.values.clone());
        }
        let sol = solve_spd(&sys, true)?;
        let mut psi = PressureField { values: sol.x };
        psi.center(self.grid);
        Ok((psi, sol.stats))
    }

    pub fn project(&self, w: &VelocityField) -> Result<VelocityField> {
        Ok(self.decompose(w)?.v)
    }

    /// `|w|_{*,0,N} = sup { ∫ w·v : v ∈ E_N, ‖v‖ = 1 } = ‖P_{E_N} w‖`.
    pub fn star0_seminorm(&self, w: &VelocityField) -> Result<f64> {
        Ok(self.project(w)?.l2_norm(self.grid))
    }

    /// Discrete initial datum for `u₀ ∉ E(Ω)`: the projection of its face means.
    pub fn leray_initialize(&self, w: &VelocityField) -> Result<VelocityField> {
        self.project(w)
    }
}

pub fn decompose(grid: &MacGrid, ops: &OperatorWorkspace, w: &VelocityField) -> Result<Decomposition> {
    Projector::new(grid, ops).decompose(w)
}

pub fn project_en(grid: &MacGrid, ops: &OperatorWorkspace, w: &VelocityField) -> Result<VelocityField> {
    Projector::new(grid, ops).project(w)
}

pub fn star0_seminorm(grid: &MacGrid, ops: &OperatorWorkspace, w: &VelocityField) -> Result<f64> {
    Projector::new(grid, ops).star0_seminorm(w)
}

pub fn leray_initialize(grid: &MacGrid, ops: &OperatorWorkspace, w: &VelocityField) -> Result<VelocityField> {
    Projector::new(grid, ops).leray_initialize(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> MacGrid {
        MacGrid::new(vec![vec![0.0, 0.2, 0.3, 0.7, 1.0], vec![0.0, 0.4, 0.6, 0.65, 1.2]]).unwrap()
    }

    fn random_w(g: &MacGrid, seed: u64) -> VelocityField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VelocityField::from_values(g, (0..g.num_faces()).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn pure_gradient() {
        let g = setup();
        let ops = OperatorWorkspace::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut q = PressureField { values: (0..g.num_cells()).map(|_| rng.random::<f64>()).collect() };
        q.center(&g);
        let w = ops.grad(&q);
        let d = Projector::new(&g, &ops).with_tolerance(1e-13).decompose(&w).unwrap();
        assert!(d.v.l2_norm(&g) < 1e-11 * w.l2_norm(&g));
        for (a, b) in d.psi.values.iter().zip(&q.values) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(star0_seminorm(&g, &ops, &w).unwrap() < 1e-9 * w.l2_norm(&g));
    }

    #[test]
    fn divergence_free_unchanged() {
        let g = setup();
        let ops = OperatorWorkspace::new(&g);
        let p = Projector::new(&g, &ops).with_tolerance(1e-13);
        let v = p.project(&random_w(&g, 2)).unwrap();
        let d = p.decompose(&v).unwrap();
        assert!(d.psi.max_abs() < 1e-11);
        assert!(d.v.sub(&v).l2_norm(&g) < 1e-11 * v.l2_norm(&g));
    }

    #[test]
    fn orthogonality_and_pythagoras() {
        let g = setup();
        let ops = OperatorWorkspace::new(&g);
        let w = random_w(&g, 3);
        let d = Projector::new(&g, &ops).with_tolerance(1e-13).decompose(&w).unwrap();
        let gp = ops.grad(&d.psi);
        assert!(ops.div(&d.v).max_abs() < 1e-9);
        assert!(d.psi.integral(&g).abs() < 1e-14);
        let lhs = w.l2_norm(&g).powi(2);
        let rhs = d.v.l2_norm(&g).powi(2) + gp.l2_norm(&g).powi(2);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-11);
        for k in 0..g.num_cells() {
            let mut e = PressureField::zeros(&g);
            e.values[k] = 1.0;
            assert!(d.v.dot(&ops.grad(&e), &g).abs() < 1e-11);
        }
        assert!(d.v.l2_norm(&g) <= w.l2_norm(&g));
    }
}
