//! Command implementations behind the CLI verbs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::bundle::{
    BundleError, KernelSummary, ManufacturedReport, Metadata, ResultBundle, Status, Timings, FORMAT_VERSION,
};
use crate::config::{ConfigError, Monitor, RunConfig};
use crate::monitors::{eigen_survey, estimate_report, uniqueness_probe_against, MonitorError};
use crate::operator::{assemble_gtilde, linearized_adjoint_apply, residual_from, ProblemData};
use crate::solver::{continuity_solve, kernel_density_with, normalize_sup, Solution, SolverError};
use crate::torus::{reduce, ComplexScalarField, Reduction};

/// Points sampled by the eigenvalue monitor.
pub const EIGEN_SAMPLES: usize = 200;
/// Gap below which the eigenvalue monitor skips a point.
pub const EIGEN_MIN_GAP: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error at {0}")]
    Config(#[from] ConfigError),
    #[error("solver aborted: {message} (diagnostics in {})", dir.display())]
    Aborted { message: String, dir: PathBuf },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("bundle integrity failure: {0}")]
    Bundle(#[from] BundleError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<crate::torus::FieldError> for AppError {
    fn from(e: crate::torus::FieldError) -> Self {
        AppError::Solver(e.into())
    }
}

impl AppError {
    /// 3 for configuration errors, 2 for solver aborts, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 3,
            AppError::Aborted { .. } => 2,
            AppError::Solver(SolverError::Config(_)) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub bundle: ResultBundle,
    pub solution: Solution,
}

fn metadata(cfg: &RunConfig, status: Status, t: f64, b: f64, residual: f64, min_eig: f64) -> Metadata {
    Metadata {
        format_version: FORMAT_VERSION,
        package_version: env!("CARGO_PKG_VERSION").to_string(),
        status,
        message: None,
        t,
        b,
        final_residual: residual,
        min_eig,
        timings: Timings {
            solve_seconds: 0.0,
            monitors_seconds: 0.0,
        },
        path: Vec::new(),
        kernel: None,
        eigen: None,
        probe: None,
        manufactured: None,
        config: cfg.clone(),
    }
}

fn kernel_summary(p: &ProblemData, sol: &Solution, cfg: &RunConfig) -> Result<KernelSummary, AppError> {
    let op = assemble_gtilde(p, &sol.u).map_err(SolverError::from)?;
    let w = kernel_density_with(&op, p.a(), &cfg.solver)?;
    let lw = linearized_adjoint_apply(&op, p.a(), &w).map_err(SolverError::from)?;
    let wsup = w.max_abs();
    let r = residual_from(&op, p, sol.b, 1.0).map_err(SolverError::from)?;
    let len = w.values().len() as f64;
    let solvability = w.values().iter().zip(r.values()).map(|(w, r)| w.re * r.re).sum::<f64>() / len;
    Ok(KernelSummary {
        defect: lw.max_abs() / wsup,
        min: reduce(&w, Reduction::Min)?,
        max: reduce(&w, Reduction::Sup)?,
        solvability,
    })
}

fn solve_and_persist(
    cfg: &RunConfig,
    p: &ProblemData,
    out: &Path,
    extra: &[Monitor],
    truth: Option<(&ComplexScalarField, f64)>,
) -> Result<RunOutcome, AppError> {
    let start = Instant::now();
    let result = continuity_solve(p, &cfg.solver);
    let solve_seconds = start.elapsed().as_secs_f64();
    let mut sol = match result {
        Ok(sol) => sol,
        Err(SolverError::StepUnderflow { last, trace, step, cause }) => {
            let message = format!("homotopy step underflow at t = {} (step {step:e}): {cause}", last.t);
            let u = normalize_sup(&last.u).map_err(SolverError::from)?;
            let op = assemble_gtilde(p, &u).map_err(SolverError::from)?;
            let mut meta = metadata(cfg, Status::Aborted, last.t, last.b, last.residual_norm, last.min_eig);
            meta.message = Some(message.clone());
            meta.timings.solve_seconds = solve_seconds;
            let bundle = ResultBundle {
                metadata: meta,
                u,
                f: p.f().clone(),
                gtilde: op.gtilde,
                estimates: None,
                trace,
            };
            bundle.write(out)?;
            return Err(AppError::Aborted {
                message,
                dir: out.to_path_buf(),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let start = Instant::now();
    let mut monitors: Vec<Monitor> = cfg.outputs.monitors.clone();
    monitors.extend_from_slice(extra);
    let mut meta = metadata(cfg, Status::Converged, 1.0, sol.b, sol.residual_norm, sol.min_eig);
    meta.path = sol.path.clone();
    let op = assemble_gtilde(p, &sol.u).map_err(SolverError::from)?;
    if monitors.contains(&Monitor::Estimates) {
        sol.report = Some(estimate_report(p, &sol)?);
    }
    if monitors.contains(&Monitor::Kernel) {
        meta.kernel = Some(kernel_summary(p, &sol, cfg)?);
    }
    if monitors.contains(&Monitor::Eigen) {
        meta.eigen = Some(eigen_survey(&op.gtilde, EIGEN_SAMPLES, EIGEN_MIN_GAP));
    }
    if monitors.contains(&Monitor::Probe) {
        meta.probe = Some(uniqueness_probe_against(p, &cfg.solver, &sol, cfg.probe_trials, cfg.seed)?);
    }
    if let Some((ustar, truth_min_eig)) = truth {
        let want = normalize_sup(ustar).map_err(SolverError::from)?;
        meta.manufactured = Some(ManufacturedReport {
            u_error: sol.u.sup_distance(&want).map_err(SolverError::from)?,
            b_error: sol.b.abs(),
            final_residual: sol.residual_norm,
            truth_min_eig,
        });
    }
    meta.timings = Timings {
        solve_seconds,
        monitors_seconds: start.elapsed().as_secs_f64(),
    };
    let bundle = ResultBundle {
        metadata: meta,
        u: sol.u.clone(),
        f: p.f().clone(),
        gtilde: op.gtilde,
        estimates: sol.report.clone(),
        trace: sol.trace.clone(),
    };
    bundle.write(out)?;
    Ok(RunOutcome {
        dir: out.to_path_buf(),
        bundle,
        solution: sol,
    })
}

fn out_dir(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| cfg.outputs.dir.clone())
}

/// Solves the configured problem and persists the bundle.
pub fn run_solve(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome, AppError> {
    let p = cfg.problem()?;
    solve_and_persist(cfg, &p, &out_dir(cfg, out), &[], None)
}

/// Solves with the source generated by the configured truth `u*`.
pub fn run_manufactured(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome, AppError> {
    let (p, ustar) = cfg.manufactured_problem()?;
    let truth_min_eig = assemble_gtilde(&p, &ustar).map_err(SolverError::from)?.min_eig;
    solve_and_persist(cfg, &p, &out_dir(cfg, out), &[], Some((&ustar, truth_min_eig)))
}

/// Solves and runs the uniqueness probe.
pub fn run_probe(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome, AppError> {
    let p = cfg.problem()?;
    solve_and_persist(cfg, &p, &out_dir(cfg, out), &[Monitor::Probe], None)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub text: String,
    pub csv: String,
}

fn e(v: f64) -> String {
    format!("{v:.17e}")
}

/// Summary text and plot CSV with one row per trace line.
pub fn run_report(dir: &Path) -> Result<Report, AppError> {
    let bundle = ResultBundle::read(dir)?;
    let m = &bundle.metadata;
    let mut text = String::new();
    let status = match m.status {
        Status::Converged => "converged",
        Status::Aborted => "aborted",
    };
    let _ = writeln!(text, "status: {status}");
    if let Some(msg) = &m.message {
        let _ = writeln!(text, "message: {msg}");
    }
    let res: Vec<String> = m.config.resolutions().iter().map(|r| r.to_string()).collect();
    let _ = writeln!(text, "n = {}, res = [{}]", m.config.n, res.join(", "));
    let _ = writeln!(text, "t = {}", e(m.t));
    let _ = writeln!(text, "b = {}", e(m.b));
    let _ = writeln!(text, "final residual = {}", e(m.final_residual));
    let _ = writeln!(text, "min eigenvalue = {}", e(m.min_eig));
    let newton: usize = m.path.iter().map(|s| s.newton_iters).sum();
    let _ = writeln!(
        text,
        "homotopy steps = {}, Newton iterations = {newton}, trace lines = {}",
        m.path.len().saturating_sub(1),
        bundle.trace.len()
    );
    if let Some(r) = &bundle.estimates {
        let _ = writeln!(text, "estimates:");
        let rows = [
            ("sup_abs_u", r.sup_abs_u),
            ("grad_sup_sq", r.grad_sup_sq),
            ("K", r.k),
            ("lambda1_max", r.lambda1_max),
            ("hessian_sup", r.hessian_sup),
            ("c2_ratio", r.c2_ratio),
            ("b_bound_slack", r.b_bound_slack),
            ("sup_F", r.sup_f),
        ];
        for (k, v) in rows {
            let _ = writeln!(text, "  {k} = {}", e(v));
        }
        match r.aeppli_defect {
            Some(d) => {
                let _ = writeln!(text, "  aeppli_defect = {}", e(d));
            }
            None => {
                let _ = writeln!(text, "  aeppli_defect = n/a");
            }
        }
    }
    if let Some(k) = &m.kernel {
        let _ = writeln!(
            text,
            "kernel density: defect = {}, range = [{}, {}], solvability = {}",
            e(k.defect),
            e(k.min),
            e(k.max),
            e(k.solvability)
        );
    }
    if let Some(s) = &m.eigen {
        let _ = writeln!(
            text,
            "eigenvalue check: {}/{} passed, {} skipped",
            s.passed, s.checked, s.skipped
        );
    }
    if let Some(pr) = &m.probe {
        let _ = writeln!(
            text,
            "uniqueness probe: {} trials, max |du| = {}, max |db| = {}, {}",
            pr.trials.len(),
            e(pr.max_u_distance),
            e(pr.max_b_distance),
            if pr.passed { "pass" } else { "FAIL" }
        );
    }
    if let Some(mr) = &m.manufactured {
        let _ = writeln!(
            text,
            "manufactured: u error = {}, b error = {}",
            e(mr.u_error),
            e(mr.b_error)
        );
    }

    let mut csv = String::from("t,newton_iter,residual_sup,b,min_eig,sup_abs_u,c2_ratio,lambda1_max,b_bound_slack\n");
    let last = bundle.trace.len().saturating_sub(1);
    for (k, r) in bundle.trace.iter().enumerate() {
        let _ = write!(csv, "{},{},{},{},{}", e(r.t), r.newton_iter, e(r.residual_sup), e(r.b), e(r.min_eig));
        match (&bundle.estimates, k == last) {
            (Some(est), true) => {
                let _ = writeln!(
                    csv,
                    ",{},{},{},{}",
                    e(est.sup_abs_u),
                    e(est.c2_ratio),
                    e(est.lambda1_max),
                    e(est.b_bound_slack)
                );
            }
            _ => csv.push_str(",,,,\n"),
        }
    }
    Ok(Report { text, csv })
}
