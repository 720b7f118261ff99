//! Re-solves with altered schedules and random warm starts, compared against
//! a primary solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MonitorError;
use crate::operator::{assemble_gtilde, ProblemData};
use crate::solver::{continuity_solve, newton_solve_at_t, normalize_sup, Solution, SolveState, SolverConfig};
use crate::torus::{sample_field, ComplexScalarField, TrigExpression, TrigTerm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrial {
    pub trial: usize,
    /// Initial homotopy step count of the re-solve.
    pub t_steps: usize,
    pub secant: bool,
    /// `sup |u - u_primary|` and `|b - b_primary|` for the re-solve.
    pub schedule_du: Option<f64>,
    pub schedule_db: Option<f64>,
    /// The same for Newton at `t = 1` from a random warm start.
    pub warm_du: Option<f64>,
    pub warm_db: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trials: Vec<ProbeTrial>,
    /// Largest pairwise sup-distance among all converged `u`, primary included.
    pub max_u_distance: f64,
    pub max_b_distance: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Random smooth perturbation scaled until `u + perturbation` keeps half of
/// the positivity margin.
fn random_warm_start(
    p: &ProblemData,
    primary: &Solution,
    rng: &mut ChaCha8Rng,
) -> Result<SolveState, MonitorError> {
    let grid = p.grid();
    let kmax = (grid.res().iter().min().copied().unwrap_or(4) / 2 - 1).min(3) as i64;
    let terms: Vec<TrigTerm> = (0..4)
        .map(|_| {
            let k: Vec<i64> = (0..grid.axes()).map(|_| rng.random_range(-kmax..=kmax)).collect();
            let amp = rng.random_range(-1.0..1.0);
            if rng.random_bool(0.5) {
                TrigTerm::cos(amp, k)
            } else {
                TrigTerm::sin(amp, k)
            }
        })
        .collect();
    let shape = sample_field(&TrigExpression::new(terms), grid)?;
    let mut scale = 0.05;
    let db = rng.random_range(-0.1..0.1);
    loop {
        let u = primary.u.axpy(scale, &shape)?;
        let op = assemble_gtilde(p, &u)?;
        if op.min_eig >= 0.5 * primary.min_eig || scale < 1e-6 {
            return Ok(SolveState {
                t: 1.0,
                u,
                b: primary.b + db,
                residual_norm: f64::NAN,
                min_eig: op.min_eig,
                newton_iters: 0,
            });
        }
        scale *= 0.5;
    }
}

fn compare(u: &ComplexScalarField, b: f64, primary: &Solution) -> Result<(f64, f64), MonitorError> {
    Ok((u.sup_distance(&primary.u)?, (b - primary.b).abs()))
}

/// Solves once, then probes.
pub fn uniqueness_probe(
    p: &ProblemData,
    cfg: &SolverConfig,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport, MonitorError> {
    let primary = continuity_solve(p, cfg)?;
    uniqueness_probe_against(p, cfg, &primary, trials, seed)
}

/// Trial `i` re-solves with `t_steps + i + 1` initial steps (secant on odd
/// trials) and runs Newton at `t = 1` from a warm start drawn with seed
/// `seed + i`.
pub fn uniqueness_probe_against(
    p: &ProblemData,
    cfg: &SolverConfig,
    primary: &Solution,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport, MonitorError> {
    let runs: Vec<Result<(ProbeTrial, Vec<(ComplexScalarField, f64)>), MonitorError>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut trial = ProbeTrial {
                trial: i,
                t_steps: cfg.t_steps + i + 1,
                secant: i % 2 == 1,
                schedule_du: None,
                schedule_db: None,
                warm_du: None,
                warm_db: None,
                errors: Vec::new(),
            };
            let mut found = Vec::new();
            let sched = SolverConfig {
                t_steps: trial.t_steps,
                secant: trial.secant,
                ..cfg.clone()
            };
            match continuity_solve(p, &sched) {
                Ok(s) => {
                    let (du, db) = compare(&s.u, s.b, primary)?;
                    trial.schedule_du = Some(du);
                    trial.schedule_db = Some(db);
                    found.push((s.u, s.b));
                }
                Err(e) => trial.errors.push(format!("schedule: {e}")),
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let warm = random_warm_start(p, primary, &mut rng)?;
            let mut trace = Vec::new();
            match newton_solve_at_t(p, cfg, &warm, 1.0, &mut trace) {
                Ok(s) => {
                    let u = normalize_sup(&s.u)?;
                    let (du, db) = compare(&u, s.b, primary)?;
                    trial.warm_du = Some(du);
                    trial.warm_db = Some(db);
                    found.push((u, s.b));
                }
                Err(e) => trial.errors.push(format!("warm start: {e}")),
            }
            Ok((trial, found))
        })
        .collect();
    let mut trials_out = Vec::with_capacity(trials);
    let mut all = vec![(primary.u.clone(), primary.b)];
    for r in runs {
        let (t, found) = r?;
        trials_out.push(t);
        all.extend(found);
    }
    let (mut max_u, mut max_b) = (0.0f64, 0.0f64);
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            max_u = max_u.max(all[i].0.sup_distance(&all[j].0)?);
            max_b = max_b.max((all[i].1 - all[j].1).abs());
        }
    }
    let tolerance = 10.0 * cfg.newton_tol;
    let passed = trials_out.iter().all(|t| t.errors.is_empty()) && max_u <= tolerance && max_b <= tolerance;
    Ok(ProbeReport {
        trials: trials_out,
        max_u_distance: max_u,
        max_b_distance: max_b,
        tolerance,
        passed,
    })
}
