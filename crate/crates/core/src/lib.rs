//! Incremental projection scheme for the incompressible Navier–Stokes
//! equations on non-uniform staggered (MAC) grids, with a verification
//! harness for its discrete structural properties.

pub mod config;
pub mod error;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod operators;
pub mod output;
pub mod projection;
pub mod quadrature;
pub mod scheme;
pub mod verify;

pub use config::{parse_config, GridSpec, ProblemSpec, RunConfig};
pub use error::{Error, Result};
pub use field::{
    cell_average, dual_cell_average, fortin_interpolate, h1_norm, trajectory_norms, w1q_norm, PressureField, Trajectory,
    TrajectoryNorms, VelocityField,
};
pub use grid::{theta, MacGrid};
pub use linalg::{solve_nonsymmetric, solve_spd, SolveStats, SolverKind, SparseSystem};
pub use operators::{ConvectionScheme, OperatorWorkspace};
pub use output::FieldFormat;
pub use projection::{decompose, leray_initialize, project_en, star0_seminorm, Decomposition, Projector};
pub use scheme::{RunFailure, Scheme, SchemeOptions, SchemeState};
pub use verify::{
    convergence_study, mms_problem, property_suite, translate_diagnostic, MmsProblem, PropertyReport, StepDiagnostics,
    StudyLevel, StudyReport,
};
