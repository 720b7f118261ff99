#![allow(dead_code)]

use cmagrad::operator::ProblemData;
use cmagrad::torus::{sample_field, ComplexScalarField, OneFormField, PeriodicGrid, TrigExpression, TrigTerm};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random trig polynomial with wavenumbers up to `kmax` per axis.
pub fn random_expr(rng: &mut ChaCha8Rng, axes: usize, terms: usize, amp: f64, kmax: i64) -> TrigExpression {
    TrigExpression::new(
        (0..terms)
            .map(|_| {
                let k = (0..axes).map(|_| rng.random_range(-kmax..=kmax)).collect();
                let a = rng.random_range(-amp..amp);
                if rng.random_bool(0.5) {
                    TrigTerm::cos(a, k)
                } else {
                    TrigTerm::sin(a, k)
                }
            })
            .collect(),
    )
}

pub fn random_field(rng: &mut ChaCha8Rng, grid: &PeriodicGrid, terms: usize, amp: f64) -> ComplexScalarField {
    let kmax = (grid.res().iter().min().unwrap() / 2 - 1).min(2) as i64;
    sample_field(&random_expr(rng, grid.axes(), terms, amp, kmax), grid).unwrap()
}

pub fn random_coeffs(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
        .collect()
}

pub fn flat_problem(grid: &PeriodicGrid, a: &[C64], f: ComplexScalarField) -> ProblemData {
    ProblemData::flat(OneFormField::constant(grid, a).unwrap(), f).unwrap()
}

/// Mean-weighted inner product on grid values.
pub fn dot(f: &[f64], h: &[f64]) -> f64 {
    f.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / f.len() as f64
}

pub fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
