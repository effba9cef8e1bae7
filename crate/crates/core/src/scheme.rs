//! First-order incremental projection scheme.
//!
//! One time step of size `δt` does
//!
//! ```text
//! prediction:  (ũ − uⁿ)/δt + C_N(uⁿ) ũ − Δ_N ũ + ∇_N pⁿ = fⁿ⁺¹,   ũ = 0 on ∂Ω
//! correction:  (uⁿ⁺¹ − ũ)/δt + ∇_N (pⁿ⁺¹ − pⁿ) = 0,   div_N uⁿ⁺¹ = 0,   Σ|K| pⁿ⁺¹ = 0
//! ```
//!
//! where the convection operator transports `ũ` by the mass fluxes of the
//! known, divergence-free `uⁿ`. The prediction is a linear nonsymmetric
//! system; the correction is a pure-Neumann Poisson problem for the pressure
//! increment.

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::field::{dual_cell_average, fortin_interpolate, h1_norm, trajectory_norms, PressureField, Trajectory, VectorFn, VelocityField};
use crate::grid::MacGrid;
use crate::linalg::{matvec, solve_nonsymmetric, SolveStats, SolverKind, SparseSystem, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use crate::operators::{ConvectionScheme, OperatorWorkspace};
use crate::projection::Projector;
use crate::verify::StepDiagnostics;

/// Space-time forcing `f(t, x)`.
pub type ForcingFn<'a> = &'a (dyn Fn(f64, [f64; 3]) -> [f64; 3] + Sync);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOptions {
    pub prediction_tolerance: f64,
    pub poisson_tolerance: f64,
    pub max_iterations: usize,
    pub convection: ConvectionScheme,
    /// Restart length of the GMRES fallback when BiCGStab breaks down.
    pub gmres_restart: usize,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            prediction_tolerance: DEFAULT_TOLERANCE,
            poisson_tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            convection: ConvectionScheme::Centered,
            gmres_restart: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchemeState {
    pub n: usize,
    pub t: f64,
    pub delta_t: f64,
    /// `uⁿ ∈ E_N`.
    pub u: VelocityField,
    /// `ũⁿ` (zero before the first step).
    pub u_tilde: VelocityField,
    /// `pⁿ`, mean zero.
    pub p: PressureField,
    /// `pⁿ⁻¹`, available from the second step on.
    pub p_prev: Option<PressureField>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitReport {
    /// Largest `|div_N u⁰|` of the raw face means.
    pub raw_divergence: f64,
    /// `‖u⁰_raw − u⁰‖_{L²}`; zero when no projection was needed.
    pub correction: f64,
    pub projected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionReport {
    pub stats: SolveStats,
    /// RHS − LHS of the linearized energy estimate for the computed `ũ`.
    pub estimate_residual: f64,
    pub estimate_scale: f64,
}

#[derive(Debug, Clone)]
pub struct Correction {
    pub u: VelocityField,
    pub p: PressureField,
    /// Pressure increment `pⁿ⁺¹ − pⁿ` (mean zero).
    pub psi: PressureField,
    pub stats: SolveStats,
    pub divergence: f64,
}

/// A run that stopped early, with the steps completed so far.
#[derive(Debug)]
pub struct RunFailure {
    pub partial: Box<Trajectory>,
    pub source: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run stopped after {} steps: {}", self.partial.len(), self.source)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub struct Scheme<'a> {
    pub grid: &'a MacGrid,
    pub ops: OperatorWorkspace,
    pub options: SchemeOptions,
}

/// Relative size of the flux imbalance under which face means count as
/// divergence-free at initialization.
const INIT_DIVERGENCE_TOL: f64 = 1e-10;

impl<'a> Scheme<'a> {
    pub fn new(grid: &'a MacGrid) -> Self {
        Self::with_options(grid, SchemeOptions::default())
    }

    pub fn with_options(grid: &'a MacGrid, options: SchemeOptions) -> Self {
        Self { grid, ops: OperatorWorkspace::new(grid), options }
    }

    fn projector(&self, tol: f64) -> Projector<'_> {
        let mut p = Projector::new(self.grid, &self.ops).with_tolerance(tol);
        p.max_iterations = self.options.max_iterations;
        p
    }

    /// Face means of `u0`, `p⁰ = 0`. Falls back to the projection onto `E_N`
    /// when the face means are not discretely divergence-free.
    pub fn initialize(&self, u0: VectorFn, delta_t: f64) -> Result<(SchemeState, InitReport)> {
        if !(delta_t > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {delta_t}")));
        }
        let raw = fortin_interpolate(self.grid, u0);
        let div = self.ops.div(&raw);
        let raw_divergence = div.max_abs();
        let imbalance = div
            .values
            .iter()
            .zip(&self.ops.cell_volume)
            .fold(0.0f64, |m, (d, v)| m.max((d * v).abs()));
        let flux_scale = (0..self.grid.num_faces())
            .map(|f| (self.grid.face_area(f) * raw.values[f]).abs())
            .fold(0.0f64, f64::max);
        let (u, projected) = if imbalance > INIT_DIVERGENCE_TOL * flux_scale {
            (self.projector(self.options.poisson_tolerance).leray_initialize(&raw)?, true)
        } else {
            (raw.clone(), false)
        };
        let correction = raw.sub(&u).l2_norm(self.grid);
        let state = SchemeState {
            n: 0,
            t: 0.0,
            delta_t,
            u_tilde: VelocityField::zeros(self.grid),
            u,
            p: PressureField::zeros(self.grid),
            p_prev: None,
        };
        Ok((state, InitReport { raw_divergence, correction, projected }))
    }

    /// Integrated prediction matrix `M/δt + C(uⁿ) + S`, identity on exterior rows.
    pub fn prediction_matrix(&self, u: &VelocityField, delta_t: f64) -> CsMat<f64> {
        let nf = self.grid.num_faces();
        let mut diag = TriMat::new((nf, nf));
        for f in 0..nf {
            let d = if self.ops.is_interior(f) { self.ops.mass[f] / delta_t } else { 1.0 };
            diag.add_triplet(f, f, d);
        }
        let conv = self.ops.convection_matrix(self.grid, u, self.options.convection);
        let lhs = &conv + &self.ops.stiffness;
        &lhs + &diag.to_csr::<usize>()
    }

    /// Solves the prediction system for `ũⁿ⁺¹` given `f_next = fⁿ⁺¹`.
    pub fn prediction(&self, state: &SchemeState, f_next: &VelocityField) -> Result<(VelocityField, PredictionReport)> {
        let dt = state.delta_t;
        let matrix = self.prediction_matrix(&state.u, dt);
        let gp = self.ops.grad(&state.p);
        let rhs: Vec<f64> = (0..self.grid.num_faces())
            .map(|f| {
                if self.ops.is_interior(f) {
                    self.ops.mass[f] * (state.u.values[f] / dt - gp.values[f] + f_next.values[f])
                } else {
                    0.0
                }
            })
            .collect();
        let mut sys = SparseSystem::new(matrix, rhs, SolverKind::BiCgStab)
            .with_tolerance(self.options.prediction_tolerance)
            .with_initial_guess(state.u.values.clone());
        sys.max_iterations = self.options.max_iterations;
        let sol = match solve_nonsymmetric(&sys) {
            Ok(s) => s,
            Err(Error::Breakdown { .. }) | Err(Error::NotConverged { .. }) => {
                sys.kind = SolverKind::Gmres { restart: self.options.gmres_restart };
                solve_nonsymmetric(&sys)?
            }
            Err(e) => return Err(e),
        };
        let ut = VelocityField::from_values(self.grid, sol.x);

        let alpha = 1.0 / dt;
        let terms = [
            0.5 * alpha * ut.l2_norm(self.grid).powi(2),
            -0.5 * alpha * state.u.l2_norm(self.grid).powi(2),
            0.5 * alpha * ut.sub(&state.u).l2_norm(self.grid).powi(2),
            -self.ops.div(&ut).dot(&state.p, self.grid),
            h1_norm(self.grid, &ut).powi(2),
        ];
        let work = f_next.dot(&ut, self.grid);
        let estimate_scale = terms.iter().fold(work.abs(), |m, t| m.max(t.abs()));
        let estimate_residual = work - terms.iter().sum::<f64>();
        Ok((ut, PredictionReport { stats: sol.stats, estimate_residual, estimate_scale }))
    }

    /// Projects `ũ` onto `E_N` and updates the pressure.
    pub fn correction(&self, state: &SchemeState, u_tilde: &VelocityField) -> Result<Correction> {
        let dt = state.delta_t;
        let limit = 10.0 * self.options.poisson_tolerance;
        let mut tol = self.options.poisson_tolerance;
        let mut guess: Option<PressureField> = None;
        let mut iterations = 0;
        // Tighten the solve until the divergence bound holds; a few decades
        // of extra accuracy always suffice for well-posed systems.
        for attempt in 0..4 {
            let (phi, stats) = self.projector(tol).potential(u_tilde, guess.as_ref())?;
            iterations += stats.iterations;
            let u = u_tilde.sub(&self.ops.grad(&phi));
            let divergence = self.ops.div(&u).max_abs();
            if divergence <= limit || attempt == 3 {
                if divergence > limit {
                    return Err(Error::DivergenceNotControlled { divergence, limit });
                }
                let psi = PressureField { values: phi.values.iter().map(|v| v / dt).collect() };
                let mut p = PressureField {
                    values: state.p.values.iter().zip(&psi.values).map(|(a, b)| a + b).collect(),
                };
                p.center(self.grid);
                let u = VelocityField::from_values(self.grid, u.values);
                return Ok(Correction { u, p, psi, stats: SolveStats { iterations, residual: stats.residual }, divergence });
            }
            guess = Some(phi);
            tol *= 0.1;
        }
        unreachable!()
    }

    /// One prediction–correction step with full diagnostics.
    pub fn step(&self, state: &SchemeState, f_next: &VelocityField) -> Result<(SchemeState, StepDiagnostics)> {
        let g = self.grid;
        let dt = state.delta_t;
        let (ut, pred) = self.prediction(state, f_next)?;
        let corr = self.correction(state, &ut)?;

        let ke_new = corr.u.l2_norm(g).powi(2);
        let ke_old = state.u.l2_norm(g).powi(2);
        let gp_new = self.ops.grad(&corr.p).l2_norm(g);
        let gp_old = self.ops.grad(&state.p).l2_norm(g);
        let coupling = ut.sub(&state.u).l2_norm(g);
        let dissipation = h1_norm(g, &ut).powi(2);
        let work = f_next.dot(&ut, g);
        let terms = [
            (ke_new - ke_old) / (2.0 * dt),
            0.5 * dt * (gp_new.powi(2) - gp_old.powi(2)),
            coupling.powi(2) / (2.0 * dt),
            dissipation,
        ];
        let energy_scale = [ke_new / (2.0 * dt), ke_old / (2.0 * dt), 0.5 * dt * gp_new.powi(2), 0.5 * dt * gp_old.powi(2), terms[2], dissipation, work.abs()]
            .into_iter()
            .fold(0.0, f64::max);
        let energy_residual = work - terms.iter().sum::<f64>();

        let momentum = state
            .p_prev
            .as_ref()
            .map(|pp| self.combined_momentum_residual(state, &ut, pp, f_next));

        let diag = StepDiagnostics {
            n: state.n + 1,
            t: (state.n + 1) as f64 * dt,
            kinetic_energy: 0.5 * ke_new,
            dissipation,
            grad_p_norm: gp_new,
            coupling_norm: coupling,
            div_max: corr.divergence,
            energy_residual,
            energy_scale,
            pressure_mean: corr.p.integral(g),
            pressure_norm: corr.p.l2_norm(g),
            pred_iters: pred.stats.iterations,
            corr_iters: corr.stats.iterations,
            pred_residual: pred.stats.residual,
            corr_residual: corr.stats.residual,
            prediction_estimate_residual: pred.estimate_residual,
            prediction_estimate_scale: pred.estimate_scale,
            momentum_residual: momentum.map(|m| m.0),
            momentum_scale: momentum.map(|m| m.1),
        };
        let next = SchemeState {
            n: state.n + 1,
            t: diag.t,
            delta_t: dt,
            u: corr.u,
            u_tilde: ut,
            p: corr.p,
            p_prev: Some(state.p.clone()),
        };
        Ok((next, diag))
    }

    /// Residual of the momentum equation obtained by adding the previous
    /// correction to the current prediction:
    /// `(ũⁿ⁺¹ − ũⁿ)/δt + C(uⁿ)ũⁿ⁺¹ + ∇(2pⁿ − pⁿ⁻¹) − Δũⁿ⁺¹ = fⁿ⁺¹`.
    /// Returns `(‖R‖, largest term norm)` in integrated form.
    fn combined_momentum_residual(&self, state: &SchemeState, ut: &VelocityField, p_prev: &PressureField, f: &VelocityField) -> (f64, f64) {
        let dt = state.delta_t;
        let conv = matvec(&self.ops.convection_matrix(self.grid, &state.u, self.options.convection), &ut.values);
        let stiff = matvec(&self.ops.stiffness, &ut.values);
        let p2 = PressureField { values: state.p.values.iter().zip(&p_prev.values).map(|(a, b)| 2.0 * a - b).collect() };
        let gp = self.ops.grad(&p2);
        let m = &self.ops.mass;
        let nf = self.grid.num_faces();
        let mut r = vec![0.0; nf];
        let mut norms = [0.0f64; 6];
        for i in 0..nf {
            if !self.ops.is_interior(i) {
                continue;
            }
            let t = [
                m[i] * ut.values[i] / dt,
                -m[i] * state.u_tilde.values[i] / dt,
                conv[i],
                m[i] * gp.values[i],
                stiff[i],
                -m[i] * f.values[i],
            ];
            r[i] = t.iter().sum();
            for (n, v) in norms.iter_mut().zip(t) {
                *n += v * v;
            }
        }
        let scale = norms.iter().map(|v| v.sqrt()).fold(0.0, f64::max);
        (r.iter().map(|v| v * v).sum::<f64>().sqrt(), scale)
    }

    /// Forcing for step `n → n+1`: dual-cell means at the midpoint time.
    pub fn forcing_at(&self, f: ForcingFn, t_mid: f64) -> VelocityField {
        dual_cell_average(self.grid, &|x| f(t_mid, x))
    }

    /// Advances `N` steps of size `T/N` from `u0`.
    pub fn run(&self, u0: VectorFn, f: ForcingFn, horizon: f64, steps: usize) -> std::result::Result<(Trajectory, InitReport), RunFailure> {
        let empty = |e: Error| RunFailure {
            partial: Box::new(Trajectory {
                delta_t: 0.0,
                horizon,
                u: Vec::new(),
                u_tilde: Vec::new(),
                p: Vec::new(),
                steps: Vec::new(),
                estimates: None,
            }),
            source: e,
        };
        if steps < 1 {
            return Err(empty(Error::InvalidArgument("N must be at least 1".into())));
        }
        if !(horizon > 0.0) {
            return Err(empty(Error::InvalidArgument("T must be positive".into())));
        }
        let dt = horizon / steps as f64;
        let (mut state, init) = self.initialize(u0, dt).map_err(empty)?;
        let mut traj = Trajectory {
            delta_t: dt,
            horizon,
            u: vec![state.u.clone()],
            u_tilde: Vec::with_capacity(steps),
            p: vec![state.p.clone()],
            steps: Vec::with_capacity(steps),
            estimates: None,
        };
        for n in 0..steps {
            let fv = self.forcing_at(f, (n as f64 + 0.5) * dt);
            match self.step(&state, &fv) {
                Ok((next, diag)) => {
                    traj.u.push(next.u.clone());
                    traj.u_tilde.push(next.u_tilde.clone());
                    traj.p.push(next.p.clone());
                    traj.steps.push(diag);
                    state = next;
                }
                Err(e) => return Err(RunFailure { partial: Box::new(traj), source: e }),
            }
        }
        traj.estimates = trajectory_norms(self.grid, &traj).ok();
        Ok((traj, init))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::cell_average;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> MacGrid {
        MacGrid::new(vec![vec![0.0, 0.3, 0.5, 0.8, 1.0], vec![0.0, 0.25, 0.6, 1.0]]).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = grid();
        let s = Scheme::new(&g);
        let (traj, init) = s.run(&|_| [0.0; 3], &|_, _| [0.0; 3], 1.0, 3).unwrap();
        assert!(!init.projected);
        for d in &traj.steps {
            assert_eq!(d.kinetic_energy, 0.0);
            assert_eq!(d.dissipation, 0.0);
            assert_eq!(d.div_max, 0.0);
            assert_eq!(d.energy_residual, 0.0);
        }
        assert!(traj.u.iter().all(|u| u.max_abs() == 0.0));
    }

    #[test]
    fn rejects_bad_run_arguments() {
        let g = grid();
        let s = Scheme::new(&g);
        assert!(s.run(&|_| [0.0; 3], &|_, _| [0.0; 3], 1.0, 0).is_err());
        assert!(s.run(&|_| [0.0; 3], &|_, _| [0.0; 3], -1.0, 2).is_err());
    }

    #[test]
    fn gradient_initial_datum_is_projected_away() {
        let g = MacGrid::unit(2, 8).unwrap();
        let s = Scheme::new(&g);
        let pi = std::f64::consts::PI;
        // ∇ of cos(πx)cos(πy): normal components vanish on the walls.
        let u0 = move |x: [f64; 3]| {
            [-pi * (pi * x[0]).sin() * (pi * x[1]).cos(), -pi * (pi * x[0]).cos() * (pi * x[1]).sin(), 0.0]
        };
        let (st, init) = s.initialize(&u0, 0.1).unwrap();
        assert!(init.projected);
        let raw = fortin_interpolate(&g, &u0).l2_norm(&g);
        assert!(st.u.l2_norm(&g) < 0.05 * raw, "{} vs {}", st.u.l2_norm(&g), raw);
        assert!(s.ops.div(&st.u).max_abs() < 1e-8);
    }

    #[test]
    fn correction_of_divergence_free_field_is_identity() {
        let g = grid();
        let s = Scheme::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = VelocityField::from_values(&g, (0..g.num_faces()).map(|_| rng.random::<f64>()).collect());
        let v = s.projector(1e-14).project(&w).unwrap();
        let (mut st, _) = s.initialize(&|_| [0.0; 3], 0.1).unwrap();
        st.p = cell_average(&g, &|x| x[0] - 0.5);
        st.p.center(&g);
        let c = s.correction(&st, &v).unwrap();
        assert!(c.psi.max_abs() < 1e-8);
        assert!(c.u.sub(&v).max_abs() < 1e-12);
        for (a, b) in c.p.values.iter().zip(&st.p.values) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn correction_annihilates_gradient() {
        let g = grid();
        let s = Scheme::new(&g);
        let (st, _) = s.initialize(&|_| [0.0; 3], 0.25).unwrap();
        let mut q = cell_average(&g, &|x| x[0] * x[0] + x[1]);
        q.center(&g);
        let c = s.correction(&st, &s.ops.grad(&q)).unwrap();
        assert!(c.u.max_abs() < 1e-9);
        for (a, b) in c.psi.values.iter().zip(&q.values) {
            assert_relative_eq!(*a, b / 0.25, epsilon = 1e-8);
        }
    }

    #[test]
    fn correction_matches_decomposition() {
        let g = grid();
        let s = Scheme::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = VelocityField::from_values(&g, (0..g.num_faces()).map(|_| rng.random_range(-1.0..1.0)).collect());
        let (st, _) = s.initialize(&|_| [0.0; 3], 0.5).unwrap();
        let c = s.correction(&st, &w).unwrap();
        let d = s.projector(1e-12).decompose(&w).unwrap();
        assert!(c.u.sub(&d.v).max_abs() < 1e-8);
        for (a, b) in c.psi.values.iter().zip(&d.psi.values) {
            assert!((0.5 * a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn prediction_with_zero_data() {
        let g = grid();
        let s = Scheme::new(&g);
        let (st, _) = s.initialize(&|_| [0.0; 3], 0.1).unwrap();
        let (ut, rep) = s.prediction(&st, &VelocityField::zeros(&g)).unwrap();
        assert_eq!(ut.max_abs(), 0.0);
        assert_eq!(rep.estimate_residual, 0.0);
    }
}
