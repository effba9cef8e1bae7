//! Discrete pressure and velocity spaces, interpolation and norms.
//!
//! Pressures are piecewise constant on primal cells. Velocities store one
//! scalar per face (global face order, see [`MacGrid`]); the value on an
//! exterior face is always zero.

use crate::error::{Error, Result};
use crate::grid::MacGrid;
use crate::quadrature::box_mean;
use crate::verify::StepDiagnostics;

/// A vector-valued function of space, in `[x, y, z]` (z ignored in 2D).
pub type VectorFn<'a> = &'a (dyn Fn([f64; 3]) -> [f64; 3] + Sync);
/// A scalar function of space.
pub type ScalarFn<'a> = &'a (dyn Fn([f64; 3]) -> f64 + Sync);

#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub values: Vec<f64>,
}

impl PressureField {
    pub fn zeros(grid: &MacGrid) -> Self {
        Self { values: vec![0.0; grid.num_cells()] }
    }

    pub fn from_fn(grid: &MacGrid, f: impl Fn([f64; 3]) -> f64) -> Self {
        Self { values: (0..grid.num_cells()).map(|k| f(grid.cell_center(k))).collect() }
    }

    /// `Σ_K |K| p_K`.
    pub fn integral(&self, grid: &MacGrid) -> f64 {
        self.values.iter().zip(grid.cell_volumes()).map(|(p, v)| p * v).sum()
    }

    /// Subtracts the volume-weighted mean so that `Σ_K |K| p_K = 0`.
    pub fn center(&mut self, grid: &MacGrid) {
        let mean = self.integral(grid) / grid.cell_volumes().iter().sum::<f64>();
        self.values.iter_mut().for_each(|p| *p -= mean);
    }

    pub fn dot(&self, other: &Self, grid: &MacGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(grid.cell_volumes())
            .map(|((a, b), v)| a * b * v)
            .sum()
    }

    pub fn l2_norm(&self, grid: &MacGrid) -> f64 {
        self.dot(self, grid).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl VelocityField {
    pub fn zeros(grid: &MacGrid) -> Self {
        Self { values: vec![0.0; grid.num_faces()] }
    }

    /// Wraps raw face values, forcing exterior faces to zero.
    pub fn from_values(grid: &MacGrid, mut values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.num_faces(), "velocity length mismatch");
        for (f, v) in values.iter_mut().enumerate() {
            if !grid.is_interior_face(f) {
                *v = 0.0;
            }
        }
        Self { values }
    }

    /// Values of component `dir`.
    pub fn component<'a>(&'a self, grid: &MacGrid, dir: usize) -> &'a [f64] {
        let set = grid.face_set(dir);
        &self.values[set.offset..set.offset + set.len()]
    }

    /// `∫_Ω u·v`, with dual-cell measures.
    pub fn dot(&self, other: &Self, grid: &MacGrid) -> f64 {
        let mut s = 0.0;
        for set in grid.face_sets() {
            let a = &self.values[set.offset..set.offset + set.len()];
            let b = &other.values[set.offset..set.offset + set.len()];
            for ((x, y), m) in a.iter().zip(b).zip(&set.dual_volume) {
                s += x * y * m;
            }
        }
        s
    }

    pub fn l2_norm(&self, grid: &MacGrid) -> f64 {
        self.dot(self, grid).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|a| a * s).collect() }
    }

    /// True when every exterior-face value is exactly zero.
    pub fn respects_no_slip(&self, grid: &MacGrid) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(f, &v)| grid.is_interior_face(f) || v == 0.0)
    }
}

/// Face-mean interpolation: the value on `σ ∈ E^(i)` is the mean of `v_i`
/// over `σ`. Preserves the divergence in the sense that
/// `div_N(P v)` on `K` equals the mean of `div v` over `K`.
pub fn fortin_interpolate(grid: &MacGrid, v: VectorFn) -> VelocityField {
    let dim = grid.dim();
    let values = (0..grid.num_faces())
        .map(|f| {
            if !grid.is_interior_face(f) {
                return 0.0;
            }
            let d = grid.face_direction(f);
            let (lo, hi) = grid.face_box(f);
            box_mean(lo, hi, dim, |x| [v(x)[d]])[0]
        })
        .collect();
    VelocityField { values }
}

/// Mean of `v_i` over each dual cell `D_σ`. Used for forcing terms.
pub fn dual_cell_average(grid: &MacGrid, v: VectorFn) -> VelocityField {
    let dim = grid.dim();
    let values = (0..grid.num_faces())
        .map(|f| {
            if !grid.is_interior_face(f) {
                return 0.0;
            }
            let d = grid.face_direction(f);
            let (lo, hi) = grid.dual_box(f);
            box_mean(lo, hi, dim, |x| [v(x)[d]])[0]
        })
        .collect();
    VelocityField { values }
}

/// Cell means `(1/|K|) ∫_K q`.
pub fn cell_average(grid: &MacGrid, q: ScalarFn) -> PressureField {
    let dim = grid.dim();
    let values = (0..grid.num_cells())
        .map(|k| {
            let (lo, hi) = grid.cell_box(k);
            box_mean(lo, hi, dim, |x| [q(x)])[0]
        })
        .collect();
    PressureField { values }
}

/// Discrete `W^{1,q}_0` norm of a velocity field: jumps across interior dual
/// faces plus the boundary values, each weighted by `|ε| / d_ε^{q-1}`.
pub fn w1q_norm(grid: &MacGrid, v: &VelocityField, q: u32) -> Result<f64> {
    if q < 1 {
        return Err(Error::InvalidArgument(format!("w1q norm needs q >= 1, got {q}")));
    }
    let qf = q as f64;
    let mut s = 0.0;
    for set in grid.face_sets() {
        for e in &set.dual_faces {
            let jump = match e.upper {
                Some(u) => v.values[e.lower] - v.values[u],
                None => v.values[e.lower],
            };
            if jump != 0.0 {
                s += e.area * jump.abs().powi(q as i32) / e.dist.powi(q as i32 - 1);
            }
        }
    }
    Ok(s.powf(1.0 / qf))
}

/// `‖v‖_{1,2,N}`.
pub fn h1_norm(grid: &MacGrid, v: &VelocityField) -> f64 {
    w1q_norm(grid, v, 2).expect("q = 2 is valid")
}

/// Piecewise-constant-in-time record of one run.
///
/// `u[n]` holds `u^n` for `n = 0..=N`, `u_tilde[n]` holds `ũ^{n+1}` for
/// `n = 0..N`, `p[n]` holds `p^n`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub delta_t: f64,
    pub horizon: f64,
    pub u: Vec<VelocityField>,
    pub u_tilde: Vec<VelocityField>,
    pub p: Vec<PressureField>,
    pub steps: Vec<StepDiagnostics>,
    /// Global estimates, filled in once a run completes.
    pub estimates: Option<TrajectoryNorms>,
}

impl Trajectory {
    /// Number of completed time steps.
    pub fn len(&self) -> usize {
        self.u_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_tilde.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.delta_t
    }
}

/// Composite space-time norms of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryNorms {
    /// `(Σ_n δt ‖ũ^{n+1}‖²_{1,2,N})^{1/2}`.
    pub predicted_l2_h1: f64,
    /// `max_n ‖u^{n+1}‖_{L²}`.
    pub corrected_linf_l2: f64,
    /// `‖u_N − ũ_N‖_{L²(0,T;L²)} = (Σ_n δt ‖ũ^{n+1} − u^n‖²)^{1/2}`.
    pub coupling_l2_l2: f64,
}

pub fn trajectory_norms(grid: &MacGrid, traj: &Trajectory) -> Result<TrajectoryNorms> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let dt = traj.delta_t;
    let mut h1 = 0.0;
    let mut linf = 0.0f64;
    let mut coupling = 0.0;
    for n in 0..traj.len() {
        h1 += dt * h1_norm(grid, &traj.u_tilde[n]).powi(2);
        if let Some(u) = traj.u.get(n + 1) {
            linf = linf.max(u.l2_norm(grid));
        }
        coupling += dt * traj.u_tilde[n].sub(&traj.u[n]).l2_norm(grid).powi(2);
    }
    Ok(TrajectoryNorms {
        predicted_l2_h1: h1.sqrt(),
        corrected_linf_l2: linf,
        coupling_l2_l2: coupling.sqrt(),
    })
}
