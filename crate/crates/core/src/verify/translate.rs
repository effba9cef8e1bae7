//! Time-translate integrals of the predicted velocity.
//!
//! `ũ_N` is piecewise constant in time (`ũ^{n+1}` on `(tⁿ, tⁿ⁺¹]`), so for
//! `τ = m δt` the integral over `(0, T − τ)` is the finite sum
//! `Σ_{n=0}^{N−1−m} δt ‖ũ^{n+1+m} − ũ^{n+1}‖²`.

use crate::error::{Error, Result};
use crate::field::Trajectory;
use crate::grid::MacGrid;
use crate::operators::OperatorWorkspace;
use crate::projection::Projector;

/// Relative tolerance for recognizing `τ` as a multiple of `δt`.
const MULTIPLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslateRow {
    pub tau: f64,
    /// `∫ ‖ũ(t+τ) − ũ(t)‖²_{L²} dt`.
    pub l2: f64,
    /// `∫ |ũ(t+τ) − ũ(t)|²_{*,0,N} dt`.
    pub star0: f64,
}

pub fn translate_diagnostic(grid: &MacGrid, ops: &OperatorWorkspace, traj: &Trajectory, taus: &[f64]) -> Result<Vec<TranslateRow>> {
    let dt = traj.delta_t;
    let steps = traj.len();
    if steps == 0 || !(dt > 0.0) {
        return Err(Error::InvalidArgument("translate diagnostic needs a non-empty trajectory".into()));
    }
    let projector = Projector::new(grid, ops).with_tolerance(1e-12);
    taus.iter()
        .map(|&tau| {
            let m = (tau / dt).round();
            if !(tau >= 0.0) || (m * dt - tau).abs() > MULTIPLE_TOL * dt {
                return Err(Error::InvalidArgument(format!("tau = {tau} is not a non-negative multiple of dt = {dt}")));
            }
            let m = m as usize;
            if m >= steps {
                return Err(Error::InvalidArgument(format!("tau = {tau} must be smaller than T = {}", dt * steps as f64)));
            }
            let mut l2 = 0.0;
            let mut star0 = 0.0;
            if m > 0 {
                for n in 0..steps - m {
                    let d = traj.u_tilde[n + m].sub(&traj.u_tilde[n]);
                    l2 += dt * d.l2_norm(grid).powi(2);
                    star0 += dt * projector.star0_seminorm(&d)?.powi(2);
                }
            }
            Ok(TranslateRow { tau, l2, star0 })
        })
        .collect()
}
