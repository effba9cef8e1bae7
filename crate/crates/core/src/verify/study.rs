//! Manufactured-solution refinement studies.
//!
//! Errors compare the piecewise-constant numerical trajectory with face means
//! of the exact velocity sampled at the right end of each time interval.

use rayon::prelude::*;

use super::mms::MmsProblem;
use crate::error::{Error, Result};
use crate::field::{fortin_interpolate, h1_norm, Trajectory};
use crate::grid::MacGrid;
use crate::scheme::{Scheme, SchemeOptions};

/// Largest allowed ratio between consecutive L²L² errors.
pub const DECREASE_RATIO: f64 = 0.8;
/// Accepted range of the coupling-norm ratio per halving of `δt`.
pub const COUPLING_RATIO: (f64, f64) = (0.4, 0.6);

#[derive(Debug, Clone)]
pub struct StudyLevel {
    pub grid: MacGrid,
    pub steps: usize,
}

/// Errors of one trajectory against the exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelErrors {
    /// `(Σ δt ‖ũ^{n+1} − P̃u(t^{n+1})‖²)^{1/2}`.
    pub l2l2: f64,
    /// `‖u^N − P̃u(T)‖`.
    pub final_l2: f64,
    /// `(Σ δt ‖ũ^{n+1} − P̃u(t^{n+1})‖²_{1,2,N})^{1/2}`.
    pub l2h1: f64,
}

impl LevelErrors {
    pub fn measure(grid: &MacGrid, problem: &MmsProblem, traj: &Trajectory) -> Result<Self> {
        if traj.is_empty() {
            return Err(Error::InvalidArgument("empty trajectory".into()));
        }
        let dt = traj.delta_t;
        let exact = |t: f64| fortin_interpolate(grid, &|x| problem.velocity(t, x));
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for n in 0..traj.len() {
            let e = traj.u_tilde[n].sub(&exact(traj.time(n + 1)));
            l2 += dt * e.l2_norm(grid).powi(2);
            h1 += dt * h1_norm(grid, &e).powi(2);
        }
        let last = traj.u.len() - 1;
        let final_l2 = traj.u[last].sub(&exact(traj.time(last))).l2_norm(grid);
        Ok(Self { l2l2: l2.sqrt(), final_l2, l2h1: h1.sqrt() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub delta_t: f64,
    pub theta: f64,
    pub l2l2_error: f64,
    pub final_l2_error: f64,
    pub l2h1_error: f64,
    /// `‖u_N − ũ_N‖_{L²(0,T;L²)}`.
    pub coupling_norm: f64,
    /// Largest relative violation of the per-step energy inequality (0 if none).
    pub max_energy_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub problem: &'static str,
    pub rows: Vec<StudyRow>,
    pub verdicts: Vec<Verdict>,
}

impl StudyReport {
    pub const CSV_HEADER: &'static str =
        "level,h,dt,theta,l2l2_error,final_l2_error,l2h1_error,coupling_norm,max_energy_violation";

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.level, r.h, r.delta_t, r.theta, r.l2l2_error, r.final_l2_error, r.l2h1_error, r.coupling_norm, r.max_energy_violation
            ));
        }
        s
    }

    pub fn summary(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                format!(
                    "level {} h={:.4e} dt={:.4e} L2L2={:.4e} final={:.4e} L2H1={:.4e} coupling={:.4e}",
                    r.level, r.h, r.delta_t, r.l2l2_error, r.final_l2_error, r.l2h1_error, r.coupling_norm
                )
            })
            .collect();
        for v in &self.verdicts {
            out.push(format!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail));
        }
        out
    }
}

fn ratios(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] / w[0]).collect()
}

fn fmt_ratios(r: &[f64]) -> String {
    r.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

/// Runs every level (concurrently) over `(0, horizon)` and checks that the
/// L²L² error shrinks by at least [`DECREASE_RATIO`] per level and that the
/// coupling norm halves with `δt`.
pub fn convergence_study(problem: &MmsProblem, levels: &[StudyLevel], horizon: f64, options: SchemeOptions) -> Result<StudyReport> {
    if levels.len() < 3 {
        return Err(Error::InvalidArgument(format!("a study needs at least 3 levels, got {}", levels.len())));
    }
    for (k, w) in levels.windows(2).enumerate() {
        if w[1].steps != 2 * w[0].steps || !(w[1].grid.h() < w[0].grid.h()) {
            return Err(Error::InvalidArgument(format!("level {} does not refine level {} in both h and N", k + 1, k)));
        }
        if w[1].grid.dim() != problem.dim || w[0].grid.dim() != problem.dim {
            return Err(Error::InvalidArgument(format!("grid dimension does not match problem {}", problem.name)));
        }
    }

    let rows = levels
        .par_iter()
        .enumerate()
        .map(|(level, lv)| {
            let scheme = Scheme::with_options(&lv.grid, options);
            let u0 = |x: [f64; 3]| problem.velocity(0.0, x);
            let f = |t: f64, x: [f64; 3]| problem.forcing(t, x);
            let (traj, _) = scheme.run(&u0, &f, horizon, lv.steps).map_err(|e| e.source)?;
            let err = LevelErrors::measure(&lv.grid, problem, &traj)?;
            let coupling = traj.estimates.map(|e| e.coupling_l2_l2).unwrap_or(f64::NAN);
            let violation = traj.steps.iter().map(|d| -d.relative_energy_residual()).fold(0.0, f64::max);
            Ok(StudyRow {
                level,
                h: lv.grid.h(),
                delta_t: traj.delta_t,
                theta: lv.grid.theta(),
                l2l2_error: err.l2l2,
                final_l2_error: err.final_l2,
                l2h1_error: err.l2h1,
                coupling_norm: coupling,
                max_energy_violation: violation,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let err_r = ratios(&rows.iter().map(|r| r.l2l2_error).collect::<Vec<_>>());
    let cpl_r = ratios(&rows.iter().map(|r| r.coupling_norm).collect::<Vec<_>>());
    let verdicts = vec![
        Verdict {
            name: "l2l2_error_decrease",
            passed: err_r.iter().all(|&r| r <= DECREASE_RATIO),
            detail: format!("ratios [{}], limit {DECREASE_RATIO}", fmt_ratios(&err_r)),
        },
        Verdict {
            name: "coupling_first_order",
            passed: cpl_r.iter().all(|&r| (COUPLING_RATIO.0..=COUPLING_RATIO.1).contains(&r)),
            detail: format!("ratios [{}], range [{}, {}]", fmt_ratios(&cpl_r), COUPLING_RATIO.0, COUPLING_RATIO.1),
        },
    ];
    Ok(StudyReport { problem: problem.name, rows, verdicts })
}
