//! Verification harness: structural property checks, manufactured
//! solutions, translate diagnostics and refinement studies.

mod mms;
mod properties;
mod study;
mod translate;

pub use mms::{mms_problem, MmsProblem, PROBLEMS};
pub use properties::{property_suite, property_suite_with, random_grid, PropertyCheck, PropertyReport};
pub use study::{convergence_study, LevelErrors, StudyLevel, StudyReport, StudyRow, Verdict};
pub use translate::{translate_diagnostic, TranslateRow};

/// Per-step scalars recorded by the time stepper.
///
/// `energy_residual` is RHS − LHS of the per-step energy inequality, so a
/// step passes when it is ≥ `−tol · energy_scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub n: usize,
    pub t: f64,
    /// `½‖uⁿ⁺¹‖²`.
    pub kinetic_energy: f64,
    /// `‖ũⁿ⁺¹‖²_{1,2,N}`.
    pub dissipation: f64,
    /// `‖∇_N pⁿ⁺¹‖`.
    pub grad_p_norm: f64,
    /// `‖ũⁿ⁺¹ − uⁿ‖`.
    pub coupling_norm: f64,
    /// `max_K |div_N uⁿ⁺¹|`.
    pub div_max: f64,
    pub energy_residual: f64,
    /// Magnitude of the largest individual term of the energy inequality.
    pub energy_scale: f64,
    /// `Σ_K |K| pⁿ⁺¹_K`.
    pub pressure_mean: f64,
    pub pressure_norm: f64,
    pub pred_iters: usize,
    pub corr_iters: usize,
    pub pred_residual: f64,
    pub corr_residual: f64,
    /// Residual of the linearized prediction estimate (RHS − LHS).
    pub prediction_estimate_residual: f64,
    pub prediction_estimate_scale: f64,
    /// Norm of the combined momentum residual; absent on the first step.
    pub momentum_residual: Option<f64>,
    pub momentum_scale: Option<f64>,
}

impl StepDiagnostics {
    pub const CSV_HEADER: &'static str =
        "n,t,kinetic_energy,dissipation,grad_p_norm,coupling_norm,div_max,energy_residual,pred_iters,corr_iters";

    /// One CSV row with 17 significant digits per float.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            self.n,
            self.t,
            self.kinetic_energy,
            self.dissipation,
            self.grad_p_norm,
            self.coupling_norm,
            self.div_max,
            self.energy_residual,
            self.pred_iters,
            self.corr_iters
        )
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.kinetic_energy,
            self.dissipation,
            self.grad_p_norm,
            self.coupling_norm,
            self.div_max,
            self.energy_residual,
            self.energy_scale,
            self.pressure_mean,
            self.pred_residual,
            self.corr_residual,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    /// Energy residual relative to the largest term (0 for an all-zero step).
    pub fn relative_energy_residual(&self) -> f64 {
        if self.energy_scale > 0.0 {
            self.energy_residual / self.energy_scale
        } else {
            self.energy_residual
        }
    }
}
