//! First-order perturbation of a simple top eigenvalue: along a real axis,
//! `d lambda_1 = V^H (dM) V` for the unit top eigenvector `V`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use serde::{Deserialize, Serialize};

use super::MonitorError;
use crate::hermitian::SmallHerm;
use crate::torus::{HermitianMatrixField, PeriodicGrid};

/// Finite-difference step, in units of the axis period.
pub const EIGEN_CHECK_STEP: f64 = 2e-3;
/// Minimum gap `lambda_1 - lambda_2` for the check to run.
const MIN_GAP: f64 = 1e-6;
/// Below this, the finite-difference error is rounding, not truncation.
const ROUNDOFF_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenCheck {
    /// Centered difference of `lambda_1` with step `h / 2`.
    pub measured: f64,
    pub predicted: f64,
    /// `|measured - predicted|` at step `h / 2`.
    pub error: f64,
    /// The same at step `h`.
    pub error_coarse: f64,
    pub gap: f64,
}

impl EigenCheck {
    /// `error_coarse / error`.
    pub fn ratio(&self) -> f64 {
        self.error_coarse / self.error
    }

    /// Second-order decay, or agreement at rounding level.
    pub fn passes(&self) -> bool {
        self.ratio() >= 3.5 || self.error <= ROUNDOFF_FLOOR * self.predicted.abs().max(1.0)
    }
}

/// Trigonometric interpolant of one matrix entry along a grid line.
struct Line {
    coeffs: Vec<C64>,
    res: usize,
}

impl Line {
    fn new(samples: &[C64]) -> Self {
        let res = samples.len();
        let coeffs = (0..res)
            .map(|k| {
                samples
                    .iter()
                    .enumerate()
                    .map(|(j, s)| s * C64::from_polar(1.0, -2.0 * PI * (k * j % res) as f64 / res as f64))
                    .sum::<C64>()
                    / res as f64
            })
            .collect();
        Self { coeffs, res }
    }

    fn eval(&self, x: f64) -> C64 {
        let half = self.res / 2;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k == half {
                    c * (2.0 * PI * half as f64 * x).cos()
                } else {
                    let m = PeriodicGrid::wavenumber(k, self.res) as f64;
                    c * C64::from_polar(1.0, 2.0 * PI * m * x)
                }
            })
            .sum()
    }

    fn derivative(&self, x: f64) -> C64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let m = PeriodicGrid::odd_wavenumber(k, self.res) as f64;
                c * C64::new(0.0, 2.0 * PI * m) * C64::from_polar(1.0, 2.0 * PI * m * x)
            })
            .sum()
    }
}

fn top_two(m: &SmallHerm) -> (f64, f64, [C64; 3]) {
    let e = m.eigh();
    let second = if m.n() > 1 { e.values[1] } else { f64::NEG_INFINITY };
    (e.values[0], second, e.vector(0))
}

/// Compares the centered difference of `lambda_1` along `axis` at grid point
/// `point` with `V^H (dM) V`, using the trigonometric interpolant of the field.
pub fn eigenvalue_derivative_check(
    field: &HermitianMatrixField,
    point: usize,
    axis: usize,
) -> Result<EigenCheck, MonitorError> {
    let grid = field.grid();
    if point >= grid.len() || axis >= grid.axes() {
        return Err(MonitorError::OutOfRange { point, axis });
    }
    let n = grid.n();
    let res = grid.res()[axis];
    let stride = grid.strides()[axis];
    let j0 = (point / stride) % res;
    let base = point - j0 * stride;
    let x0 = j0 as f64 / res as f64;
    let lines: Vec<Line> = (0..n * n)
        .map(|e| {
            let samples: Vec<C64> = (0..res)
                .map(|j| field.entry(base + j * stride, e / n, e % n))
                .collect();
            Line::new(&samples)
        })
        .collect();
    let matrix_at = |x: f64| {
        let data: Vec<C64> = lines.iter().map(|l| l.eval(x)).collect();
        let mut m = SmallHerm::from_row_major(n, &data);
        // restore exact Hermitian symmetry lost to rounding
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (m.get(i, j) + m.get(j, i).conj());
                m.set(i, j, v);
            }
        }
        m
    };
    let (_, second, v) = top_two(&field.at(point));
    let lambda1 = field.at(point).eigh().values[0];
    let gap = lambda1 - second;
    if gap < MIN_GAP {
        return Err(MonitorError::NearDegenerate { gap });
    }
    let mut predicted = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            predicted += v[i].conj() * lines[i * n + j].derivative(x0) * v[j];
        }
    }
    let predicted = predicted.re;
    let centered = |h: f64| (top_two(&matrix_at(x0 + h)).0 - top_two(&matrix_at(x0 - h)).0) / (2.0 * h);
    let h = EIGEN_CHECK_STEP;
    let coarse = centered(h);
    let measured = centered(h / 2.0);
    Ok(EigenCheck {
        measured,
        predicted,
        error: (measured - predicted).abs(),
        error_coarse: (coarse - predicted).abs(),
        gap,
    })
}

/// Counts over a strided sample of `(point, axis)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSurvey {
    pub sampled: usize,
    /// Pairs with gap at least `min_gap`.
    pub checked: usize,
    pub passed: usize,
    pub skipped: usize,
}

impl EigenSurvey {
    pub fn pass_fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.passed as f64 / self.checked as f64
        }
    }
}

/// Runs the check at up to `max_points` evenly strided points, cycling
/// through the axes, skipping points whose gap is below `min_gap`.
pub fn eigen_survey(field: &HermitianMatrixField, max_points: usize, min_gap: f64) -> EigenSurvey {
    let grid = field.grid();
    let len = grid.len();
    let stride = (len / max_points.max(1)).max(1);
    // odd offset so the sample is not aligned with the axes
    let points: Vec<usize> = (0..len).step_by(stride).take(max_points).map(|q| (q + stride / 2) % len).collect();
    let mut out = EigenSurvey {
        sampled: points.len(),
        checked: 0,
        passed: 0,
        skipped: 0,
    };
    for (k, &q) in points.iter().enumerate() {
        match eigenvalue_derivative_check(field, q, k % grid.axes()) {
            Ok(c) if c.gap >= min_gap => {
                out.checked += 1;
                out.passed += c.passes() as usize;
            }
            _ => out.skipped += 1,
        }
    }
    out
}
