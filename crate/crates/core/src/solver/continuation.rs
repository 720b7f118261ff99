use log::{debug, info};

use super::krylov::bordered_solve;
use super::{
    SolveState, SolverConfig, SolverError, StateSummary, TraceRecord, MIN_STEP,
};
use crate::monitors::EstimateReport;
use crate::operator::{assemble_gtilde, residual_from, Linearization, OperatorError, OperatorOutput, ProblemData};
use crate::torus::{dealias, reduce, ComplexScalarField, FieldError, Reduction};

/// The normalized pair `(u, b)` at `t = 1` and the path that led to it.
#[derive(Clone, Debug)]
pub struct Solution {
    /// `sup u = 0`.
    pub u: ComplexScalarField,
    pub b: f64,
    pub residual_norm: f64,
    pub min_eig: f64,
    /// Accepted states, one per homotopy step, starting at `t = 0`.
    pub path: Vec<StateSummary>,
    /// Every Newton iteration, including those of rejected steps.
    pub trace: Vec<TraceRecord>,
    pub report: Option<EstimateReport>,
}

/// `u - sup u`.
pub fn normalize_sup(u: &ComplexScalarField) -> Result<ComplexScalarField, FieldError> {
    let s = reduce(u, Reduction::Sup)?;
    Ok(u.shifted(-s))
}

fn residual(
    op: &OperatorOutput,
    p: &ProblemData,
    b: f64,
    t: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, f64), OperatorError> {
    let mut r = residual_from(op, p, b, t)?;
    if cfg.dealias {
        r = dealias(&r);
    }
    let norm = r.max_abs();
    Ok((r.re(), norm))
}

fn mean_free(u: &ComplexScalarField) -> Result<ComplexScalarField, FieldError> {
    u.require_real()?;
    Ok(u.shifted(-reduce(u, Reduction::Mean)?))
}

/// Damped Newton on `(u, b)` at fixed `t`, recording one trace line per iteration.
pub fn newton_solve_at_t(
    p: &ProblemData,
    cfg: &SolverConfig,
    warm: &SolveState,
    t: f64,
    trace: &mut Vec<TraceRecord>,
) -> Result<SolveState, SolverError> {
    let mut u = mean_free(&warm.u)?;
    let mut b = warm.b;
    let mut op = assemble_gtilde(p, &u)?;
    if !op.is_admissible() {
        return Err(OperatorError::Degenerate { min_eig: op.min_eig }.into());
    }
    let (mut r, mut rn) = residual(&op, p, b, t, cfg)?;
    let record = |k: usize, rn: f64, op: &OperatorOutput, b: f64| TraceRecord {
        t,
        newton_iter: k,
        residual_sup: rn,
        min_eig: op.min_eig,
        b,
    };
    trace.push(record(0, rn, &op, b));
    let mut k = 0;
    while rn > cfg.newton_tol {
        if k == cfg.max_newton || !rn.is_finite() {
            return Err(SolverError::NewtonDiverged {
                t,
                iterations: k,
                residual: rn,
            });
        }
        k += 1;
        let lin = Linearization::new(&op, p.a())?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = bordered_solve(&lin, &rhs, cfg);
        // inexact Newton: a partial solve still gives a descent direction
        if !step.converged && !(step.rel_residual < 0.5) {
            return Err(SolverError::Krylov {
                achieved: step.rel_residual,
                iterations: step.iterations,
            });
        }
        let mut lambda = 1.0;
        loop {
            let trial = u.axpy(lambda, &step.du)?;
            let bt = b + lambda * step.db;
            let opt = assemble_gtilde(p, &trial)?;
            if opt.is_admissible() && opt.min_eig >= cfg.eig_floor * op.min_eig {
                let (rt, rtn) = residual(&opt, p, bt, t, cfg)?;
                if rtn < rn {
                    u = trial;
                    b = bt;
                    op = opt;
                    r = rt;
                    rn = rtn;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < cfg.damping_min {
                return Err(SolverError::LineSearch {
                    t,
                    residual: rn,
                    damping_min: cfg.damping_min,
                });
            }
        }
        debug!("t={t} iter={k} residual={rn:e} lambda={lambda} krylov={}", step.iterations);
        trace.push(record(k, rn, &op, b));
    }
    Ok(SolveState {
        t,
        u,
        b,
        residual_norm: rn,
        min_eig: op.min_eig,
        newton_iters: k,
    })
}

fn secant_guess(
    p: &ProblemData,
    prev: &SolveState,
    cur: &SolveState,
    t_next: f64,
) -> Result<Option<SolveState>, SolverError> {
    let s = (t_next - cur.t) / (cur.t - prev.t);
    let u = cur.u.axpy(s, &cur.u.sub(&prev.u)?)?;
    let op = assemble_gtilde(p, &u)?;
    if !op.is_admissible() {
        return Ok(None);
    }
    Ok(Some(SolveState {
        t: t_next,
        b: cur.b + s * (cur.b - prev.b),
        u,
        residual_norm: f64::NAN,
        min_eig: op.min_eig,
        newton_iters: 0,
    }))
}

/// Continuation from `(0, 0)` at `t = 0` to `t = 1`.
pub fn continuity_solve(p: &ProblemData, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    cfg.validate().map_err(SolverError::Config)?;
    let grid = p.grid();
    let start = SolveState {
        t: 0.0,
        u: ComplexScalarField::zeros(grid),
        b: 0.0,
        residual_norm: f64::NAN,
        min_eig: p.g_min_eig(),
        newton_iters: 0,
    };
    let mut trace = Vec::new();
    let mut state = newton_solve_at_t(p, cfg, &start, 0.0, &mut trace)?;
    let mut path = vec![state.summary()];
    let mut prev: Option<SolveState> = None;
    let mut step = 1.0 / cfg.t_steps as f64;
    let mut streak = 0;
    while state.t < 1.0 {
        let t_next = if state.t + step >= 1.0 - 1e-12 { 1.0 } else { state.t + step };
        let warm = match (&prev, cfg.secant) {
            (Some(prev), true) => secant_guess(p, prev, &state, t_next)?,
            _ => None,
        };
        let warm = warm.as_ref().unwrap_or(&state);
        match newton_solve_at_t(p, cfg, warm, t_next, &mut trace) {
            Ok(next) => {
                info!(
                    "accepted t={} b={:.6e} residual={:.3e} iters={}",
                    next.t, next.b, next.residual_norm, next.newton_iters
                );
                path.push(next.summary());
                prev = Some(std::mem::replace(&mut state, next));
                streak += 1;
                if streak >= 2 {
                    step = (2.0 * step).min(1.0);
                    streak = 0;
                }
            }
            Err(e) if e.is_step_failure() => {
                streak = 0;
                step *= 0.5;
                info!("rejected t={t_next}: {e}; step now {step:e}");
                if step < MIN_STEP {
                    return Err(SolverError::StepUnderflow {
                        step,
                        last: Box::new(state),
                        trace,
                        cause: e.to_string(),
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Solution {
        u: normalize_sup(&state.u)?,
        b: state.b,
        residual_norm: state.residual_norm,
        min_eig: state.min_eig,
        path,
        trace,
        report: None,
    })
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64 as C64;

    use super::*;
    use crate::operator::ma_residual;
    use crate::torus::{sample_field, OneFormField, PeriodicGrid, TrigExpression, TrigTerm};

    fn flat(grid: &PeriodicGrid, a: C64, f: ComplexScalarField) -> ProblemData {
        let form = OneFormField::constant(grid, &vec![a; grid.n()]).unwrap();
        ProblemData::flat(form, f).unwrap()
    }

    fn zero_state(grid: &PeriodicGrid) -> SolveState {
        SolveState {
            t: 0.0,
            u: ComplexScalarField::zeros(grid),
            b: 0.0,
            residual_norm: f64::NAN,
            min_eig: 1.0,
            newton_iters: 0,
        }
    }

    #[test]
    fn normalize_examples() {
        let g = PeriodicGrid::uniform(1, 8).unwrap();
        let five = normalize_sup(&ComplexScalarField::constant(&g, 5.0)).unwrap();
        assert!(five.values().iter().all(|v| v.re == 0.0));
        let c = sample_field(&TrigExpression::new(vec![TrigTerm::cos(1.0, vec![1, 0])]), &g).unwrap();
        let n1 = normalize_sup(&c).unwrap();
        for (a, b) in n1.values().iter().zip(c.values()) {
            assert_eq!(a.re, b.re - 1.0);
        }
        assert_eq!(normalize_sup(&n1).unwrap(), n1);
    }

    #[test]
    fn identity_start_needs_no_iterations() {
        let g = PeriodicGrid::uniform(1, 16).unwrap();
        let f = sample_field(&TrigExpression::new(vec![TrigTerm::sin(0.5, vec![1, 1])]), &g).unwrap();
        let p = flat(&g, C64::new(0.3, 0.0), f);
        let mut trace = Vec::new();
        let s = newton_solve_at_t(&p, &SolverConfig::default(), &zero_state(&g), 0.0, &mut trace).unwrap();
        assert_eq!(s.newton_iters, 0);
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn constant_source_is_one_step() {
        let g = PeriodicGrid::uniform(2, 8).unwrap();
        let p = flat(&g, C64::new(0.2, -0.1), ComplexScalarField::constant(&g, 0.6));
        let mut trace = Vec::new();
        let s = newton_solve_at_t(&p, &SolverConfig::default(), &zero_state(&g), 1.0, &mut trace).unwrap();
        assert_eq!(s.newton_iters, 1);
        assert!(s.u.max_abs() < 1e-13);
        assert!((s.b + 0.6).abs() < 1e-13);
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        let g = PeriodicGrid::uniform(1, 32).unwrap();
        let truth = TrigExpression::new(vec![
            TrigTerm::cos(0.05, vec![1, 0]),
            TrigTerm::sin(0.01, vec![1, 2]),
        ]);
        let ustar = sample_field(&truth, &g).unwrap();
        let p0 = flat(&g, C64::new(0.2, 0.1), ComplexScalarField::zeros(&g));
        let fstar = assemble_gtilde(&p0, &ustar).unwrap().log_det_ratio.unwrap();
        let p = p0.with_source(fstar).unwrap();
        let cfg = SolverConfig::default();
        let sol = continuity_solve(&p, &cfg).unwrap();
        let want = normalize_sup(&ustar).unwrap();
        assert!(sol.u.sup_distance(&want).unwrap() < 1e-10);
        assert!(sol.b.abs() < 1e-10);
        assert!(sol.residual_norm <= cfg.newton_tol);
        assert_eq!(reduce(&sol.u, Reduction::Sup).unwrap(), 0.0);
        let r = ma_residual(&p, &sol.u, sol.b, 1.0).unwrap();
        assert!(r.max_abs() <= 1e-10);
        assert_eq!(sol.path.first().unwrap().t, 0.0);
        assert_eq!(sol.path.last().unwrap().t, 1.0);
    }

    #[test]
    fn secant_matches_zeroth_order() {
        let g = PeriodicGrid::uniform(1, 16).unwrap();
        let f = sample_field(
            &TrigExpression::new(vec![TrigTerm::cos(0.8, vec![1, 0]), TrigTerm::sin(0.3, vec![0, 2])]),
            &g,
        )
        .unwrap();
        let p = flat(&g, C64::new(0.1, 0.2), f);
        let base = continuity_solve(&p, &SolverConfig::default()).unwrap();
        let cfg = SolverConfig {
            secant: true,
            t_steps: 5,
            ..Default::default()
        };
        let sec = continuity_solve(&p, &cfg).unwrap();
        assert!(base.u.sup_distance(&sec.u).unwrap() < 1e-10);
        assert!((base.b - sec.b).abs() < 1e-10);
    }

    #[test]
    fn underflow_keeps_last_state() {
        // F so negative that gt must degenerate before t = 1
        let g = PeriodicGrid::uniform(1, 8).unwrap();
        let f = sample_field(&TrigExpression::new(vec![TrigTerm::cos(40.0, vec![1, 0])]), &g).unwrap();
        let p = flat(&g, C64::new(0.0, 0.0), f);
        let cfg = SolverConfig {
            max_newton: 3,
            ..Default::default()
        };
        match continuity_solve(&p, &cfg) {
            Err(SolverError::StepUnderflow { last, trace, .. }) => {
                assert!(last.t < 1.0);
                assert!(last.min_eig > 0.0);
                assert!(!trace.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
