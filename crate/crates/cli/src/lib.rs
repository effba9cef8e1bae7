//! Command-line driver. [`run`] maps an argument vector to an exit code:
//! 0 on success, 1 when a verdict or a run fails, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use macproj::config::{parse_config_with_env, ProblemSpec, RunConfig};
use macproj::linalg::write_matrix_market;
use macproj::output::{diagnostics_csv, emit_fields, translate_csv, write_text};
use macproj::verify::{convergence_study, mms_problem, property_suite, translate_diagnostic, LevelErrors, MmsProblem, StudyLevel};
use macproj::{Error, MacGrid, OperatorWorkspace, Scheme, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Relative slack for energy-inequality violations in `run`.
const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "macproj", version, about = "Incremental projection scheme on MAC grids")]
struct Cli {
    /// Run configuration file (flat key = value with [sections]).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding output.dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for randomized checks, overriding run.seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time-step the configured problem and write diagnostics.
    Run,
    /// Randomized structural property checks on the configured grid.
    Verify {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Refinement study of a manufactured solution.
    Convergence {
        /// Number of levels; each one bisects every cell and doubles N.
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Export the assembled operators and check their algebraic identities.
    OperatorsCheck,
    /// Time-translate integrals of the predicted velocity.
    Translate {
        /// Shifts τ (multiples of T/N); defaults to 1, 2, 4, 8 steps.
        #[arg(long, value_delimiter = ',')]
        taus: Vec<f64>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Verdict(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::UnknownProblem(_) | Error::InvalidArgument(_) | Error::InvalidGrid(_) => Failure::Usage(e.to_string()),
            _ => Failure::Verdict(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Verdict(m)) => {
            eprintln!("failed: {m}");
            EXIT_FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = parse_config_with_env(&text, std::env::vars()).map_err(|e| Failure::Usage(format!("invalid configuration:\n{e}")))?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn io(e: Error) -> Failure {
    Failure::Verdict(e.to_string())
}

fn dispatch(cli: Cli) -> Outcome {
    let cfg = load_config(&cli)?;
    let grid = cfg.grid.build()?;
    let out = cfg.output_dir.clone();
    // Provenance: every invocation records the configuration it resolved.
    write_text(&out.join("config.resolved"), &cfg.to_text()).map_err(io)?;
    match cli.command {
        Command::Run => cmd_run(&cfg, &grid, &out),
        Command::Verify { trials } => cmd_verify(&cfg, &grid, &out, trials),
        Command::Convergence { levels } => cmd_convergence(&cfg, &grid, &out, levels),
        Command::OperatorsCheck => cmd_operators(&grid, &out),
        Command::Translate { taus } => cmd_translate(&cfg, &grid, &out, &taus),
    }
}

type InitFn = Box<dyn Fn([f64; 3]) -> [f64; 3] + Sync>;
type ForceFn = Box<dyn Fn(f64, [f64; 3]) -> [f64; 3] + Sync>;

fn problem_data(cfg: &RunConfig) -> Result<(InitFn, ForceFn, Option<MmsProblem>), Failure> {
    match &cfg.problem {
        ProblemSpec::Mms(name) => {
            let p = mms_problem(name)?;
            let (a, b) = (p.clone(), p.clone());
            Ok((Box::new(move |x| a.velocity(0.0, x)), Box::new(move |t, x| b.forcing(t, x)), Some(p)))
        }
        ProblemSpec::ConstantForce(f) => {
            let mut c = [0.0; 3];
            c[..f.len()].copy_from_slice(f);
            Ok((Box::new(|_| [0.0; 3]), Box::new(move |_, _| c), None))
        }
    }
}

/// Runs the configured problem, writing diagnostics (also for a partial
/// trajectory when a step fails).
fn simulate(cfg: &RunConfig, grid: &MacGrid, out: &Path) -> Result<(Scheme<'static>, Trajectory), Failure> {
    let (u0, f, _) = problem_data(cfg)?;
    // The scheme borrows the grid for its lifetime; a leaked clone keeps the
    // CLI free of self-referential state.
    let grid: &'static MacGrid = Box::leak(Box::new(grid.clone()));
    let scheme = Scheme::with_options(grid, cfg.scheme_options());
    match scheme.run(&*u0, &*f, cfg.horizon, cfg.steps) {
        Ok((traj, init)) => {
            if init.projected {
                println!("initial velocity projected onto discretely divergence-free fields (correction {:.3e})", init.correction);
            }
            write_text(&out.join("diagnostics.csv"), &diagnostics_csv(&traj.steps)).map_err(io)?;
            Ok((scheme, traj))
        }
        Err(fail) => {
            write_text(&out.join("diagnostics.csv"), &diagnostics_csv(&fail.partial.steps)).map_err(io)?;
            write_snapshots(cfg, grid, &fail.partial, out)?;
            Err(match fail.source {
                e @ (Error::InvalidArgument(_) | Error::InvalidGrid(_)) => Failure::Usage(e.to_string()),
                e => Failure::Verdict(format!("run stopped after {} of {} steps: {e}", fail.partial.len(), cfg.steps)),
            })
        }
    }
}

fn write_snapshots(cfg: &RunConfig, grid: &MacGrid, traj: &Trajectory, out: &Path) -> Outcome {
    if cfg.output_every == 0 {
        return Ok(());
    }
    let ext = cfg.output_format.name();
    for n in (0..traj.u.len()).step_by(cfg.output_every) {
        let path = out.join("fields").join(format!("step_{n:06}.{ext}"));
        emit_fields(grid, &traj.u[n], &traj.p[n], cfg.output_format, &path).map_err(io)?;
    }
    Ok(())
}

fn cmd_run(cfg: &RunConfig, grid: &MacGrid, out: &Path) -> Outcome {
    let (_, traj) = simulate(cfg, grid, out)?;
    write_snapshots(cfg, grid, &traj, out)?;
    let mut worst = 0.0f64;
    let mut div = 0.0f64;
    for d in &traj.steps {
        println!(
            "step {:>5} t={:.6} energy={:.6e} dissipation={:.6e} div={:.3e} energy_residual={:+.3e} iters={}/{}",
            d.n,
            d.t,
            d.kinetic_energy,
            d.dissipation,
            d.div_max,
            d.energy_residual,
            d.pred_iters,
            d.corr_iters
        );
        worst = worst.max(-d.relative_energy_residual());
        div = div.max(d.div_max);
    }
    if let Some(p) = problem_data(cfg)?.2 {
        let e = LevelErrors::measure(grid, &p, &traj)?;
        println!("errors vs {}: L2L2={:.6e} final L2={:.6e} L2H1={:.6e}", p.name, e.l2l2, e.final_l2, e.l2h1);
    }
    let div_limit = 10.0 * cfg.poisson_tolerance;
    if worst > ENERGY_TOL {
        return Err(Failure::Verdict(format!("energy inequality violated by {worst:.3e} (relative)")));
    }
    if div > div_limit {
        return Err(Failure::Verdict(format!("divergence {div:.3e} exceeds {div_limit:.1e}")));
    }
    println!("run: {} steps, diagnostics in {}", traj.len(), out.join("diagnostics.csv").display());
    Ok(())
}

fn cmd_verify(cfg: &RunConfig, grid: &MacGrid, out: &Path, trials: usize) -> Outcome {
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let report = property_suite(grid, trials, cfg.seed);
    let mut csv = String::from("check,max_residual,threshold,passed\n");
    for c in &report.checks {
        csv.push_str(&format!("{},{:.16e},{:.16e},{}\n", c.name, c.max_residual, c.threshold, c.passed));
    }
    write_text(&out.join("properties.csv"), &csv).map_err(io)?;
    for line in report.summary() {
        println!("{line}");
    }
    if report.passed() {
        println!("verify: {} checks passed over {trials} trials (seed {})", report.checks.len(), cfg.seed);
        Ok(())
    } else {
        Err(Failure::Verdict("property checks failed".into()))
    }
}

fn cmd_convergence(cfg: &RunConfig, grid: &MacGrid, out: &Path, levels: usize) -> Outcome {
    let ProblemSpec::Mms(name) = &cfg.problem else {
        return Err(Failure::Usage("convergence needs a manufactured-solution problem".into()));
    };
    if levels < 3 {
        return Err(Failure::Usage("--levels must be at least 3".into()));
    }
    let problem = mms_problem(name)?;
    let mut list = vec![StudyLevel { grid: grid.clone(), steps: cfg.steps }];
    for k in 1..levels {
        let prev = &list[k - 1];
        list.push(StudyLevel { grid: prev.grid.refined(), steps: 2 * prev.steps });
    }
    let report = convergence_study(&problem, &list, cfg.horizon, cfg.scheme_options())?;
    write_text(&out.join("study.csv"), &report.to_csv()).map_err(io)?;
    for line in report.summary() {
        println!("{line}");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verdict("convergence verdicts failed".into()))
    }
}

fn cmd_operators(grid: &MacGrid, out: &Path) -> Outcome {
    let ops = OperatorWorkspace::new(grid);
    let dir = out.join("operators");
    fs::create_dir_all(&dir).map_err(|e| io(e.into()))?;
    for (name, m) in [("grad", &ops.grad), ("div", &ops.div), ("stiffness", &ops.stiffness), ("poisson", &ops.poisson)] {
        write_matrix_market(m, &dir.join(format!("{name}.mtx"))).map_err(io)?;
    }

    let max_abs = |m: &macproj::linalg::CsMatrix| m.iter().map(|(v, _)| v.abs()).fold(0.0, f64::max);
    let asymmetry = |m: &macproj::linalg::CsMatrix| {
        m.iter().map(|(v, (i, j))| (v - m.get(j, i).copied().unwrap_or(0.0)).abs()).fold(0.0, f64::max) / max_abs(m)
    };
    let mut row_sum = vec![0.0; grid.num_cells()];
    for (v, (i, _)) in ops.poisson.iter() {
        row_sum[i] += v;
    }
    let kernel = row_sum.iter().map(|s| s.abs()).fold(0.0, f64::max) / max_abs(&ops.poisson);
    // |D_σ| grad[σ, K] = −|K| div[K, σ] on interior faces.
    let mut duality = 0.0f64;
    for (v, (f, k)) in ops.grad.iter() {
        if grid.is_interior_face(f) {
            let d = ops.div.get(k, f).copied().unwrap_or(0.0);
            let lhs = grid.dual_volume(f) * v;
            duality = duality.max((lhs + grid.cell_volumes()[k] * d).abs() / lhs.abs());
        }
    }
    let checks = [
        ("stiffness_symmetry", asymmetry(&ops.stiffness), 1e-14),
        ("poisson_symmetry", asymmetry(&ops.poisson), 1e-14),
        ("poisson_constant_kernel", kernel, 1e-12),
        ("grad_div_duality", duality, 1e-14),
    ];
    println!("grid: {} cells, {} faces, h={:.4e}, theta={:.4}", grid.num_cells(), grid.num_faces(), grid.h(), grid.theta());
    let mut ok = true;
    for (name, value, limit) in checks {
        let pass = value <= limit;
        ok &= pass;
        println!("{} {name:<24} {value:.3e} (threshold {limit:.0e})", if pass { "PASS" } else { "FAIL" });
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Verdict("operator identities failed".into()))
    }
}

fn cmd_translate(cfg: &RunConfig, grid: &MacGrid, out: &Path, taus: &[f64]) -> Outcome {
    let (scheme, traj) = simulate(cfg, grid, out)?;
    let dt = traj.delta_t;
    let taus: Vec<f64> = if taus.is_empty() {
        [1usize, 2, 4, 8].iter().filter(|&&m| m < traj.len()).map(|&m| m as f64 * dt).collect()
    } else {
        taus.to_vec()
    };
    let rows = translate_diagnostic(scheme.grid, &scheme.ops, &traj, &taus)?;
    write_text(&out.join("translate.csv"), &translate_csv(&rows)).map_err(io)?;
    let mut ok = true;
    for r in &rows {
        let ordered = r.star0 <= r.l2 * (1.0 + 1e-13);
        ok &= ordered;
        println!("tau={:.6} L2={:.6e} star0={:.6e}{}", r.tau, r.l2, r.star0, if ordered { "" } else { "  (star0 > L2)" });
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Verdict("star0 column exceeds the L2 column".into()))
    }
}
