//! Sparse systems and Krylov solvers.
//!
//! Two solvers cover the two systems of a time step: Jacobi-preconditioned
//! conjugate gradients for the (possibly singular) pressure Poisson matrix and
//! BiCGStab for the nonsymmetric prediction matrix, with restarted GMRES as a
//! fallback. Every solver recomputes the true residual before returning.

use sprs::CsMat;

/// Compressed sparse matrix used for every assembled operator.
pub type CsMatrix = CsMat<f64>;

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 20_000;

/// `y = A x`, rows accumulated in index order.
pub fn matvec(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    matvec_into(a, x, &mut y);
    y
}

fn matvec_into(a: &CsMat<f64>, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a.cols(), x.len());
    for (row, vec) in a.outer_iterator().enumerate() {
        let mut s = 0.0;
        for (col, &v) in vec.iter() {
            s += v * x[col];
        }
        y[row] = s;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    ConjugateGradient,
    BiCgStab,
    Gmres { restart: usize },
}

/// Kernel spanned by the constant vector. `weights` define the mean that is
/// set to zero on the returned solution (e.g. cell volumes).
#[derive(Debug, Clone)]
pub struct NullSpace {
    pub weights: Vec<f64>,
    /// Magnitude the rhs defect `|Σ b|` is measured against; `Σ |b|` when
    /// absent. Assemblies whose rhs sums to zero only up to cancellation
    /// should pass the size of the cancelling terms.
    pub rhs_scale: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsMat<f64>,
    pub rhs: Vec<f64>,
    pub kind: SolverKind,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub nullspace: Option<NullSpace>,
    /// Starting iterate; zero when absent.
    pub initial_guess: Option<Vec<f64>>,
}

impl SparseSystem {
    pub fn new(matrix: CsMat<f64>, rhs: Vec<f64>, kind: SolverKind) -> Self {
        Self {
            matrix,
            rhs,
            kind,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            nullspace: None,
            initial_guess: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.rhs.len()
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_nullspace(mut self, weights: Vec<f64>) -> Self {
        self.nullspace = Some(NullSpace { weights, rhs_scale: None });
        self
    }

    /// Sets [`NullSpace::rhs_scale`]; no effect without a nullspace.
    pub fn with_rhs_scale(mut self, scale: f64) -> Self {
        if let Some(ns) = self.nullspace.as_mut() {
            ns.rhs_scale = Some(scale);
        }
        self
    }

    pub fn with_initial_guess(mut self, x0: Vec<f64>) -> Self {
        self.initial_guess = Some(x0);
        self
    }

    fn check(&self) -> Result<()> {
        let n = self.rhs.len();
        if self.matrix.rows() != n || self.matrix.cols() != n {
            return Err(Error::InvalidArgument(format!(
                "matrix is {}x{} but rhs has {n} entries",
                self.matrix.rows(),
                self.matrix.cols()
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} outside (0, 1)", self.tolerance)));
        }
        Ok(())
    }

    /// Independently recomputed `‖b − A x‖ / ‖b‖` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = matvec(&self.matrix, x);
        let r: Vec<f64> = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let bn = norm(&self.rhs);
        if bn > 0.0 {
            norm(&r) / bn
        } else {
            norm(&r)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub stats: SolveStats,
}

fn jacobi(a: &CsMat<f64>) -> Vec<f64> {
    let mut d = vec![1.0; a.rows()];
    for (row, vec) in a.outer_iterator().enumerate() {
        if let Some(&v) = vec.get(row) {
            if v != 0.0 {
                d[row] = 1.0 / v;
            }
        }
    }
    d
}

fn project_out_constant(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn center_weighted(v: &mut [f64], w: &[f64]) {
    let m = dot(v, w) / w.iter().sum::<f64>();
    v.iter_mut().for_each(|x| *x -= m);
}

/// Conjugate gradients for a symmetric positive (semi)definite system.
///
/// With `deflate_constants`, the system must carry a [`NullSpace`]; the rhs
/// must be orthogonal to the constants and the returned solution has zero
/// weighted mean.
pub fn solve_spd(sys: &SparseSystem, deflate_constants: bool) -> Result<Solution> {
    sys.check()?;
    let n = sys.dimension();
    let mut b = sys.rhs.clone();
    let weights = if deflate_constants {
        let ns = sys
            .nullspace
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("deflation requested without a nullspace".into()))?;
        let scale = ns.rhs_scale.unwrap_or_else(|| b.iter().map(|x| x.abs()).sum());
        let defect = if scale > 0.0 { b.iter().sum::<f64>().abs() / scale } else { 0.0 };
        if defect > 1e-10 {
            return Err(Error::IncompatibleRhs { defect });
        }
        project_out_constant(&mut b);
        Some(&ns.weights)
    } else {
        None
    };

    let bnorm = norm(&b);
    if bnorm == 0.0 {
        return Ok(Solution { x: vec![0.0; n], stats: SolveStats::default() });
    }
    let minv = jacobi(&sys.matrix);
    let mut x = sys.initial_guess.clone().unwrap_or_else(|| vec![0.0; n]);
    let mut ax = matvec(&sys.matrix, &x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if deflate_constants {
        project_out_constant(&mut r);
    }
    let target = sys.tolerance * bnorm;
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(r, m)| r * m).collect();
    if deflate_constants {
        project_out_constant(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while norm(&r) > target {
        if it >= sys.max_iterations {
            return Err(Error::NotConverged { solver: "cg", iterations: it, residual: norm(&r) / bnorm });
        }
        it += 1;
        matvec_into(&sys.matrix, &p, &mut ax);
        let pap = dot(&p, &ax);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::Breakdown { solver: "cg", iteration: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        // Periodically replace the recursive residual by the true one.
        if it % 50 == 0 {
            let t = matvec(&sys.matrix, &x);
            for i in 0..n {
                r[i] = b[i] - t[i];
            }
        }
        if deflate_constants {
            project_out_constant(&mut r);
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        if deflate_constants {
            project_out_constant(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if let Some(w) = weights {
        center_weighted(&mut x, w);
    }
    finish("cg", sys, &b, x, it)
}

fn finish(solver: &'static str, sys: &SparseSystem, b: &[f64], x: Vec<f64>, iterations: usize) -> Result<Solution> {
    let ax = matvec(&sys.matrix, &x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let residual = norm(&r) / norm(b);
    // Allow for the roundoff between the recursive and the true residual.
    if !(residual <= 10.0 * sys.tolerance) {
        return Err(Error::NotConverged { solver, iterations, residual });
    }
    Ok(Solution { x, stats: SolveStats { iterations, residual } })
}

/// Right-preconditioned BiCGStab for a nonsymmetric system whose symmetric
/// part is positive definite.
pub fn solve_nonsymmetric(sys: &SparseSystem) -> Result<Solution> {
    sys.check()?;
    match sys.kind {
        SolverKind::Gmres { restart } => return gmres(sys, restart),
        SolverKind::ConjugateGradient | SolverKind::BiCgStab => {}
    }
    let n = sys.dimension();
    let b = &sys.rhs;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(Solution { x: vec![0.0; n], stats: SolveStats::default() });
    }
    let minv = jacobi(&sys.matrix);
    let mut x = sys.initial_guess.clone().unwrap_or_else(|| vec![0.0; n]);
    let ax = matvec(&sys.matrix, &x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let r0 = r.clone();
    let target = sys.tolerance * bnorm;
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zs = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut it = 0;
    while norm(&r) > target {
        if it >= sys.max_iterations {
            return Err(Error::NotConverged { solver: "bicgstab", iterations: it, residual: norm(&r) / bnorm });
        }
        it += 1;
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            return Err(Error::Breakdown { solver: "bicgstab", iteration: it });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = minv[i] * p[i];
        }
        matvec_into(&sys.matrix, &y, &mut v);
        let r0v = dot(&r0, &v);
        if r0v.abs() < 1e-300 {
            return Err(Error::Breakdown { solver: "bicgstab", iteration: it });
        }
        alpha = rho / r0v;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            r.copy_from_slice(&s);
            break;
        }
        for i in 0..n {
            zs[i] = minv[i] * s[i];
        }
        matvec_into(&sys.matrix, &zs, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zs[i];
            r[i] = s[i] - omega * t[i];
        }
        if !norm(&r).is_finite() {
            return Err(Error::Breakdown { solver: "bicgstab", iteration: it });
        }
    }
    finish("bicgstab", sys, b, x, it)
}

/// Restarted GMRES with right Jacobi preconditioning.
fn gmres(sys: &SparseSystem, restart: usize) -> Result<Solution> {
    let n = sys.dimension();
    let m = restart.max(1);
    let b = &sys.rhs;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(Solution { x: vec![0.0; n], stats: SolveStats::default() });
    }
    let minv = jacobi(&sys.matrix);
    let target = sys.tolerance * bnorm;
    let mut x = sys.initial_guess.clone().unwrap_or_else(|| vec![0.0; n]);
    let mut it = 0;
    loop {
        let ax = matvec(&sys.matrix, &x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= target {
            break;
        }
        if it >= sys.max_iterations {
            return Err(Error::NotConverged { solver: "gmres", iterations: it, residual: beta / bnorm });
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            it += 1;
            let z: Vec<f64> = basis[k].iter().zip(&minv).map(|(v, d)| v * d).collect();
            let mut w = matvec(&sys.matrix, &z);
            for (j, q) in basis.iter().enumerate() {
                let h = dot(&w, q);
                hess[j][k] = h;
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= h * qi);
            }
            let hn = norm(&w);
            hess[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let d = hess[k][k].hypot(hess[k + 1][k]);
            if d == 0.0 {
                return Err(Error::Breakdown { solver: "gmres", iteration: it });
            }
            cs[k] = hess[k][k] / d;
            sn[k] = hess[k + 1][k] / d;
            hess[k][k] = d;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= target || hn == 0.0 || it >= sys.max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut yk = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * yk[j];
            }
            yk[i] = s / hess[i][i];
        }
        for (j, yj) in yk.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * minv[i] * basis[j][i];
            }
        }
    }
    finish("gmres", sys, b, x, it)
}

/// Writes a matrix in MatrixMarket coordinate format.
pub fn write_matrix_market(a: &CsMat<f64>, path: &std::path::Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.rows(), a.cols(), a.nnz());
    for (row, vec) in a.outer_iterator().enumerate() {
        for (col, &v) in vec.iter() {
            let _ = writeln!(s, "{} {} {:.16e}", row + 1, col + 1, v);
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}
