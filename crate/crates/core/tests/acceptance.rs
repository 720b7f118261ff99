//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails the
//! target if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use cmagrad::app::{run_manufactured, run_solve};
use cmagrad::bundle::{ResultBundle, F_FILE, GTILDE_FILE, U_FILE};
use cmagrad::config::parse_config;
use cmagrad::hermitian::SmallHerm;
use cmagrad::monitors::{aeppli_defect, eigen_survey, estimate_report, uniqueness_probe_against};
use cmagrad::operator::{
    assemble_gtilde, linearized_adjoint_apply, linearized_apply, trace_of_metric, OperatorOutput, ProblemData,
};
use cmagrad::solver::{continuity_solve, kernel_density, Solution, SolverConfig};
use cmagrad::torus::{
    reduce, sample_field, ComplexScalarField, HermitianMatrixField, OneFormField, PeriodicGrid, Reduction,
};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use common::{dot, flat_problem, random_coeffs, random_expr, random_field, rng, sup};

const TRIVIAL_TOL: f64 = 1e-10;
const TRIVIAL_SECONDS: u64 = 10;
const CONSTANT_TOL: f64 = 1e-10;
const MANUFACTURED_U_TOL: f64 = 1e-8;
const MANUFACTURED_B_TOL: f64 = 1e-8;
const MANUFACTURED_RESIDUAL_TOL: f64 = 1e-10;
const MANUFACTURED_SECONDS_N1: u64 = 60;
const MANUFACTURED_SECONDS_N2: u64 = 600;
const B_BOUND_TOL: f64 = 1e-8;
const CORPUS_SIZE: usize = 24;
const PROBE_TRIALS: usize = 3;
const PROBE_FACTOR: f64 = 10.0;
const TRACE_TOL: f64 = 1e-9;
const TRACE_SAMPLES: usize = 50;
const GATEAUX_RATIO: f64 = 3.5;
const GATEAUX_DIRECTIONS: usize = 20;
const ADJOINT_TOL: f64 = 1e-10;
const ADJOINT_PAIRS: usize = 20;
const KERNEL_TOL: f64 = 1e-8;
const AEPPLI_TOL: f64 = 1e-10;
const EIGEN_FRACTION: f64 = 0.99;
const EIGEN_GAP: f64 = 1e-3;
const EIGEN_FIELDS: usize = 10;
const EIGEN_POINTS: usize = 400;
const STABILITY_REL: f64 = 0.05;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn seconds(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

/// Resolution used for corpus problems in dimension `n`.
fn corpus_res(n: usize) -> usize {
    match n {
        1 => 32,
        2 => 8,
        _ => 6,
    }
}

struct CorpusCase {
    p: ProblemData,
    sup_f: f64,
    solution: Result<Solution, String>,
}

fn corpus() -> Vec<CorpusCase> {
    let mut r = rng(2024);
    (0..CORPUS_SIZE)
        .map(|k| {
            let n = k % 3 + 1;
            let grid = PeriodicGrid::uniform(n, corpus_res(n)).unwrap();
            let expr = random_expr(&mut r, 2 * n, 3, 1.0, 2);
            let raw = sample_field(&expr, &grid).unwrap();
            let target = r.random_range(0.2..1.0);
            let f = raw.scaled(target / reduce(&raw, Reduction::SupAbs).unwrap().max(1e-300));
            let a = random_coeffs(&mut r, n, 0.3);
            let p = flat_problem(&grid, &a, f);
            let sup_f = reduce(p.f(), Reduction::SupAbs).unwrap();
            let solution = continuity_solve(&p, &SolverConfig::default()).map_err(|e| e.to_string());
            CorpusCase { p, sup_f, solution }
        })
        .collect()
}

/// Random state with `min_eig >= 0.5`, amplitude halved until admissible.
fn admissible_state(r: &mut ChaCha8Rng, p: &ProblemData) -> (ComplexScalarField, OperatorOutput) {
    let shape = random_field(r, p.grid(), 4, 1.0);
    let mut amp = 0.05;
    loop {
        let u = shape.scaled(amp);
        let op = assemble_gtilde(p, &u).unwrap();
        if op.min_eig >= 0.5 {
            return (u, op);
        }
        amp *= 0.5;
    }
}

/// Flat or smoothly perturbed reference metric, alternating with `k`.
fn reference_problem(r: &mut ChaCha8Rng, k: usize) -> ProblemData {
    let n = k % 3 + 1;
    let grid = PeriodicGrid::uniform(n, if n == 3 { 4 } else { 8 }).unwrap();
    let a = OneFormField::constant(&grid, &random_coeffs(r, n, 0.3)).unwrap();
    let zero = ComplexScalarField::zeros(&grid);
    if k % 2 == 0 {
        return ProblemData::flat(a, zero).unwrap();
    }
    let entries: Vec<(usize, usize, ComplexScalarField, ComplexScalarField)> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, random_field(r, &grid, 2, 0.1), random_field(r, &grid, 2, 0.1)))
        .collect();
    let g = HermitianMatrixField::from_fn(&grid, |q| {
        let mut m = SmallHerm::identity(n);
        for (i, j, re, im) in &entries {
            let im = if i == j { 0.0 } else { im.values()[q].re };
            m.set(*i, *j, m.get(*i, *j) + C64::new(re.values()[q].re, im));
        }
        m
    });
    ProblemData::new(g, a, zero).unwrap()
}

fn trivial_solves() -> Verdict {
    let mut r = rng(1);
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, res) in [(1, 64), (2, 16), (3, 8)] {
        let grid = PeriodicGrid::uniform(n, res).unwrap();
        let p = flat_problem(&grid, &random_coeffs(&mut r, n, 0.5), ComplexScalarField::zeros(&grid));
        let start = Instant::now();
        let sol = continuity_solve(&p, &SolverConfig::default()).unwrap();
        let took = start.elapsed();
        let u = sol.u.max_abs();
        pass &= u <= TRIVIAL_TOL && sol.b.abs() <= TRIVIAL_TOL && took <= Duration::from_secs(TRIVIAL_SECONDS);
        parts.push(format!("n={n} |u|={u:.1e} |b|={:.1e} {}", sol.b.abs(), seconds(took)));
    }
    verdict(pass, parts.join("; "))
}

fn constant_source() -> Verdict {
    let mut r = rng(2);
    let mut pass = true;
    let mut worst_b: f64 = 0.0;
    let mut worst_u: f64 = 0.0;
    for n in 1..=3 {
        let grid = PeriodicGrid::uniform(n, if n == 3 { 4 } else { 8 }).unwrap();
        let a = random_coeffs(&mut r, n, 0.5);
        for c in [0.5, -0.5, 1.0, -1.0] {
            let p = flat_problem(&grid, &a, ComplexScalarField::constant(&grid, c));
            let sol = continuity_solve(&p, &SolverConfig::default()).unwrap();
            worst_b = worst_b.max((sol.b + c).abs());
            worst_u = worst_u.max(sol.u.max_abs());
        }
    }
    pass &= worst_b <= CONSTANT_TOL && worst_u <= CONSTANT_TOL;
    verdict(pass, format!("max |b + c| = {worst_b:.1e}, max |u| = {worst_u:.1e} over n = 1..3"))
}

fn manufactured(out: &Path) -> Verdict {
    let cases = [
        (
            r#"{"n": 1, "res": 128, "a": {"constant": [[0.2, 0.1]]},
                "truth": [{"amplitude": 0.05, "wavevector": [1, 0], "phase": "cos"}]}"#,
            MANUFACTURED_SECONDS_N1,
        ),
        (
            r#"{"n": 2, "res": 24, "a": {"constant": [[0.2, 0.1], [0.2, 0.1]]},
                "truth": [{"amplitude": 0.03, "wavevector": [1, 0, 0, 0], "phase": "cos"},
                          {"amplitude": 0.03, "wavevector": [0, 0, 0, 1], "phase": "sin"}]}"#,
            MANUFACTURED_SECONDS_N2,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (text, limit)) in cases.iter().enumerate() {
        let cfg = parse_config(text, true).unwrap();
        let start = Instant::now();
        let run = run_manufactured(&cfg, Some(&out.join(format!("manufactured{k}")))).unwrap();
        let took = start.elapsed();
        let m = run.bundle.metadata.manufactured.clone().unwrap();
        pass &= m.u_error <= MANUFACTURED_U_TOL
            && run.solution.b.abs() <= MANUFACTURED_B_TOL
            && m.final_residual <= MANUFACTURED_RESIDUAL_TOL
            && took <= Duration::from_secs(*limit);
        parts.push(format!(
            "n={} u err {:.1e} |b| {:.1e} residual {:.1e} {}",
            cfg.n,
            m.u_error,
            run.solution.b.abs(),
            m.final_residual,
            seconds(took)
        ));
    }
    verdict(pass, parts.join("; "))
}

fn b_bound(corpus: &[CorpusCase]) -> Verdict {
    let mut converged = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for (k, c) in corpus.iter().enumerate() {
        match &c.solution {
            Ok(s) => {
                converged += 1;
                worst = worst.max(s.b.abs() - c.sup_f);
            }
            Err(e) => failures.push(format!("case {k}: {e}")),
        }
    }
    let pass = converged >= 20 && worst <= B_BOUND_TOL;
    let mut detail = format!("{converged}/{} converged, max(|b| - sup|F|) = {worst:.3e}", corpus.len());
    if !failures.is_empty() {
        detail.push_str(&format!(" [{}]", failures.join("; ")));
    }
    verdict(pass, detail)
}

fn uniqueness(corpus: &[CorpusCase]) -> Verdict {
    let cfg = SolverConfig::default();
    let tol = PROBE_FACTOR * cfg.newton_tol;
    let mut pass = true;
    let (mut du, mut db): (f64, f64) = (0.0, 0.0);
    let mut checked = 0;
    for (k, c) in corpus.iter().enumerate() {
        let Ok(primary) = &c.solution else {
            pass = false;
            continue;
        };
        let report = uniqueness_probe_against(&c.p, &cfg, primary, PROBE_TRIALS, 100 + k as u64).unwrap();
        let errors = report.trials.iter().any(|t| !t.errors.is_empty());
        pass &= report.passed && !errors && report.max_u_distance <= tol && report.max_b_distance <= tol;
        du = du.max(report.max_u_distance);
        db = db.max(report.max_b_distance);
        checked += 1;
    }
    verdict(pass, format!("{checked} problems x {PROBE_TRIALS} trials: max |du| = {du:.1e}, max |db| = {db:.1e} (tol {tol:.0e})"))
}

fn trace_identity() -> Verdict {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for k in 0..TRACE_SAMPLES {
        let p = reference_problem(&mut r, k);
        let (u, op) = admissible_state(&mut r, &p);
        let lu = linearized_apply(&op, p.a(), &u).unwrap();
        let tr = trace_of_metric(&op, &p).unwrap();
        let n = p.n() as f64;
        worst = worst.max(sup(lu.values().iter().zip(&tr).map(|(l, t)| l.re - (n - t))));
    }
    verdict(worst <= TRACE_TOL, format!("{TRACE_SAMPLES} states: max error {worst:.2e}"))
}

fn gateaux() -> Verdict {
    let mut r = rng(7);
    let mut worst = f64::INFINITY;
    for k in 0..GATEAUX_DIRECTIONS {
        let p = reference_problem(&mut r, k);
        let (u, op) = admissible_state(&mut r, &p);
        let v = random_field(&mut r, p.grid(), 4, 0.01);
        let lv = linearized_apply(&op, p.a(), &v).unwrap();
        let err = |s: f64| {
            let plus = assemble_gtilde(&p, &u.axpy(s, &v).unwrap()).unwrap().log_det_ratio.unwrap();
            let minus = assemble_gtilde(&p, &u.axpy(-s, &v).unwrap()).unwrap().log_det_ratio.unwrap();
            sup((0..p.grid().len())
                .map(|q| (plus.values()[q].re - minus.values()[q].re) / (2.0 * s) - lv.values()[q].re))
        };
        worst = worst.min(err(0.1) / err(0.05));
    }
    verdict(worst >= GATEAUX_RATIO, format!("{GATEAUX_DIRECTIONS} directions: min ratio {worst:.3}"))
}

fn adjoint_and_kernel() -> Verdict {
    let mut r = rng(8);
    let mut worst_pair: f64 = 0.0;
    for k in 0..ADJOINT_PAIRS {
        let p = reference_problem(&mut r, k);
        let (_, op) = admissible_state(&mut r, &p);
        let v = random_field(&mut r, p.grid(), 5, 1.0);
        let w = random_field(&mut r, p.grid(), 5, 1.0);
        let lv = linearized_apply(&op, p.a(), &v).unwrap().re();
        let lsw = linearized_adjoint_apply(&op, p.a(), &w).unwrap().re();
        let (vr, wr) = (v.re(), w.re());
        let scale = dot(&vr, &vr).sqrt() * dot(&wr, &wr).sqrt();
        worst_pair = worst_pair.max((dot(&lv, &wr) - dot(&vr, &lsw)).abs() / scale);
    }
    let mut worst_kernel: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    let mut positive = true;
    for k in 0..6 {
        let p = reference_problem(&mut r, k);
        let (_, op) = admissible_state(&mut r, &p);
        let w = kernel_density(&op, p.a()).unwrap();
        let lsw = linearized_adjoint_apply(&op, p.a(), &w).unwrap();
        worst_kernel = worst_kernel.max(lsw.max_abs());
        worst_mean = worst_mean.max((reduce(&w, Reduction::Mean).unwrap() - 1.0).abs());
        positive &= w.values().iter().all(|x| x.re > 0.0);
    }
    let grid = PeriodicGrid::uniform(2, 8).unwrap();
    let p = ProblemData::flat(OneFormField::zero(&grid), ComplexScalarField::zeros(&grid)).unwrap();
    let op = assemble_gtilde(&p, &ComplexScalarField::zeros(&grid)).unwrap();
    let flat = kernel_density(&op, p.a()).unwrap();
    let flat_dev = sup(flat.values().iter().map(|w| w.re - 1.0));
    let pass = worst_pair <= ADJOINT_TOL && worst_kernel <= KERNEL_TOL && worst_mean <= 1e-12 && positive && flat_dev <= 1e-12;
    verdict(
        pass,
        format!(
            "duality {worst_pair:.1e} (relative); kernel sup|L*w| {worst_kernel:.1e}, |mean - 1| {worst_mean:.1e}, flat |w - 1| {flat_dev:.1e}"
        ),
    )
}

fn aeppli(corpus: &[CorpusCase]) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for c in corpus {
        if let Ok(s) = &c.solution {
            worst = worst.max(aeppli_defect(&c.p, &s.u).unwrap());
            checked += 1;
        }
    }
    verdict(checked == corpus.len() && worst <= AEPPLI_TOL, format!("{checked} solutions: max defect {worst:.2e}"))
}

fn random_hermitian_field(r: &mut ChaCha8Rng, k: usize) -> HermitianMatrixField {
    let n = if k % 2 == 0 { 3 } else { 2 };
    let grid = PeriodicGrid::uniform(n, if n == 3 { 4 } else { 8 }).unwrap();
    let entries: Vec<(ComplexScalarField, ComplexScalarField)> =
        (0..n * n).map(|_| (random_field(r, &grid, 3, 0.3), random_field(r, &grid, 3, 0.3))).collect();
    let base: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
    HermitianMatrixField::from_fn(&grid, |q| {
        let mut m = SmallHerm::diag(&base);
        for i in 0..n {
            for j in i..n {
                let (re, im) = &entries[i * n + j];
                let im = if i == j { 0.0 } else { im.values()[q].re };
                m.set(i, j, m.get(i, j) + C64::new(re.values()[q].re, im));
            }
        }
        m
    })
}

fn eigenvalue_perturbation() -> Verdict {
    let mut r = rng(10);
    let mut worst: f64 = 1.0;
    let (mut checked, mut skipped) = (0, 0);
    for k in 0..EIGEN_FIELDS {
        let field = random_hermitian_field(&mut r, k);
        let s = eigen_survey(&field, EIGEN_POINTS, EIGEN_GAP);
        worst = worst.min(s.pass_fraction());
        checked += s.checked;
        skipped += s.skipped;
    }
    verdict(
        worst >= EIGEN_FRACTION && checked > 0,
        format!("{EIGEN_FIELDS} fields, {checked} points checked, {skipped} skipped: min pass fraction {worst:.4}"),
    )
}

fn monitor_stability() -> Verdict {
    let mut values = Vec::new();
    for res in [64, 128, 256] {
        let text = format!(
            r#"{{"n": 1, "res": {res}, "a": {{"constant": [[0.25, -0.15]]}},
                "F": [{{"amplitude": 0.4, "wavevector": [1, 0], "phase": "cos"}},
                      {{"amplitude": 0.2, "wavevector": [1, 2], "phase": "sin"}},
                      {{"amplitude": 0.1, "wavevector": [3, -1], "phase": "cos"}}]}}"#
        );
        let cfg = parse_config(&text, true).unwrap();
        let p = cfg.problem().unwrap();
        let sol = continuity_solve(&p, &cfg.solver).unwrap();
        let rep = estimate_report(&p, &sol).unwrap();
        values.push((rep.sup_abs_u, rep.c2_ratio));
    }
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
    let mut worst: f64 = 0.0;
    for w in values.windows(2) {
        worst = worst.max(rel(w[0].0, w[1].0)).max(rel(w[0].1, w[1].1));
    }
    let (u, c2) = values[2];
    verdict(
        worst <= STABILITY_REL,
        format!("res 64/128/256: sup|u| {u:.6e}, c2 ratio {c2:.6e}, max relative change {worst:.1e}"),
    )
}

fn determinism(out: &Path) -> Verdict {
    let text = r#"{"n": 2, "res": 8, "a": {"constant": [[0.2, 0.1], [-0.1, 0.05]]},
        "F": [{"amplitude": 0.5, "wavevector": [1, 0, 0, 1], "phase": "sin"}],
        "outputs": {"monitors": ["estimates", "kernel", "eigen", "probe"]}, "seed": 42}"#;
    let cfg = parse_config(text, true).unwrap();
    let a = out.join("det_a");
    let b = out.join("det_b");
    run_solve(&cfg, Some(&a)).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    single.install(|| run_solve(&cfg, Some(&b))).unwrap();
    let mut identical = true;
    for name in [U_FILE, F_FILE, GTILDE_FILE] {
        identical &= std::fs::read(a.join(name)).unwrap() == std::fs::read(b.join(name)).unwrap();
    }
    let mut reloaded = 0;
    let mut failures = Vec::new();
    for entry in std::fs::read_dir(out).unwrap() {
        let dir = entry.unwrap().path();
        match ResultBundle::read(&dir) {
            Ok(_) => reloaded += 1,
            Err(e) => failures.push(e.to_string()),
        }
    }
    let mut detail = format!("field bytes identical across thread counts: {identical}; {reloaded} bundles re-validated");
    if !failures.is_empty() {
        detail.push_str(&format!(" [{}]", failures.join("; ")));
    }
    verdict(identical && failures.is_empty() && reloaded >= 4, detail)
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        verdict(false, format!("panicked: {msg}"))
    });
    println!(
        "{} {id:>2} {name}: {} ({})",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail,
        seconds(start.elapsed())
    );
    v.pass
}

fn main() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    let mut results = vec![
        run(1, "trivial solve", trivial_solves),
        run(2, "constant source", constant_source),
        run(3, "manufactured recovery", || manufactured(out)),
    ];
    let start = Instant::now();
    let corpus = corpus();
    println!("     corpus of {CORPUS_SIZE} random problems solved in {}", seconds(start.elapsed()));
    results.push(run(4, "b-bound", || b_bound(&corpus)));
    results.push(run(5, "uniqueness", || uniqueness(&corpus)));
    results.push(run(6, "trace identity", trace_identity));
    results.push(run(7, "linearization", gateaux));
    results.push(run(8, "adjoint duality and kernel", adjoint_and_kernel));
    results.push(run(9, "Aeppli identity", || aeppli(&corpus)));
    results.push(run(10, "eigenvalue perturbation", eigenvalue_perturbation));
    results.push(run(11, "monitor stability", monitor_stability));
    results.push(run(12, "determinism and persistence", || determinism(out)));
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
