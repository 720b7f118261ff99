//! Positive density spanning the kernel of `L*`.
//!
//! Inverse iteration at shift zero, started from `w = 1`: each sweep solves
//! `L* phi = -L* w` for mean-zero `phi` with GMRES preconditioned by the
//! transposed mean-coefficient symbol, then sets `w <- w + phi`.

use num_complex::Complex64 as C64;

use super::gmres::gmres;
use super::{SolverConfig, SolverError};
use crate::operator::{Linearization, OperatorOutput};
use crate::torus::{ComplexScalarField, OneFormField};

const MAX_SWEEPS: usize = 8;
/// Acceptance threshold on `sup |L* w| / sup |w|`.
pub const KERNEL_TOL: f64 = 1e-8;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn lift(lin: &Linearization, y: &[f64]) -> Vec<f64> {
    let grid = lin.grid();
    let mut hat: Vec<C64> = y.iter().map(|&v| C64::new(v, 0.0)).collect();
    grid.fft_forward(&mut hat);
    hat[0] = C64::new(0.0, 0.0);
    for (h, s) in hat.iter_mut().zip(lin.preconditioner_symbol_transpose()).skip(1) {
        *h /= s;
    }
    grid.fft_inverse(&mut hat);
    hat.into_iter().map(|v| v.re).collect()
}

pub fn kernel_density(op: &OperatorOutput, a: &OneFormField) -> Result<ComplexScalarField, SolverError> {
    kernel_density_with(op, a, &SolverConfig::default())
}

/// As [`kernel_density`] with the linear-solve controls of `cfg`.
pub fn kernel_density_with(
    op: &OperatorOutput,
    a: &OneFormField,
    cfg: &SolverConfig,
) -> Result<ComplexScalarField, SolverError> {
    let lin = Linearization::new(op, a)?;
    let len = lin.grid().len();
    let mut w = vec![1.0; len];
    let mut defect = sup(&lin.apply_adjoint(&w)) / sup(&w);
    for _ in 0..MAX_SWEEPS {
        if defect <= 1e-3 * KERNEL_TOL {
            break;
        }
        let d = lin.apply_adjoint(&w);
        let mean = d.iter().sum::<f64>() / len as f64;
        let rhs: Vec<f64> = d.iter().map(|v| mean - v).collect();
        let out = gmres(
            |y| lin.apply_adjoint(&lift(&lin, y)),
            &rhs,
            cfg.krylov_tol,
            cfg.krylov_max,
            cfg.krylov_restart,
        );
        let phi = lift(&lin, &out.x);
        let next: Vec<f64> = w.iter().zip(&phi).map(|(w, p)| w + p).collect();
        let next_defect = sup(&lin.apply_adjoint(&next)) / sup(&next);
        if !(next_defect < defect) {
            break;
        }
        w = next;
        defect = next_defect;
    }
    if !(defect <= KERNEL_TOL) {
        return Err(SolverError::KernelStagnation { defect });
    }
    let mean = w.iter().sum::<f64>() / len as f64;
    for v in &mut w {
        *v /= mean;
    }
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(SolverError::KernelNotPositive { min });
    }
    Ok(ComplexScalarField::from_real_unchecked(lin.grid(), w))
}
