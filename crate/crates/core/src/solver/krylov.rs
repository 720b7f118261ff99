//! Bordered linear system `L du - db = rhs`, `mean(du) = 0`.
//!
//! GMRES runs on a single real vector `y` with right preconditioning: the
//! non-constant modes of `y` are divided by the mean-coefficient symbol of
//! `L` to give `du`, and `db = -mean(y)`.

use num_complex::Complex64 as C64;

use super::gmres::gmres;
use super::{SolverConfig, SolverError};
use crate::operator::{Linearization, OperatorOutput};
use crate::torus::calculus::dealias_spectrum;
use crate::torus::{ComplexScalarField, OneFormField};

#[derive(Clone, Debug)]
pub struct BorderedSolve {
    pub du: ComplexScalarField,
    pub db: f64,
    pub rel_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn unknowns(lin: &Linearization, y: &[f64], dealias: bool) -> (Vec<C64>, f64) {
    let grid = lin.grid();
    let mut hat: Vec<C64> = y.iter().map(|&v| C64::new(v, 0.0)).collect();
    grid.fft_forward(&mut hat);
    let db = -hat[0].re / grid.len() as f64;
    let sym = lin.preconditioner_symbol();
    hat[0] = C64::new(0.0, 0.0);
    for (h, s) in hat.iter_mut().zip(sym).skip(1) {
        *h /= s;
    }
    if dealias {
        dealias_spectrum(grid, &mut hat);
    }
    (hat, db)
}

pub(crate) fn bordered_solve(
    lin: &Linearization,
    rhs: &[f64],
    cfg: &SolverConfig,
) -> BorderedSolve {
    let out = gmres(
        |y| {
            let (hat, db) = unknowns(lin, y, cfg.dealias);
            let mut lv = lin.apply_spectrum(&hat);
            for v in &mut lv {
                *v -= db;
            }
            lv
        },
        rhs,
        cfg.krylov_tol,
        cfg.krylov_max,
        cfg.krylov_restart,
    );
    let grid = lin.grid();
    let (mut hat, db) = unknowns(lin, &out.x, cfg.dealias);
    grid.fft_inverse(&mut hat);
    let du = ComplexScalarField::from_real_unchecked(grid, hat.into_iter().map(|v| v.re).collect());
    BorderedSolve {
        du,
        db,
        rel_residual: out.rel_residual,
        iterations: out.iterations,
        converged: out.converged,
    }
}

/// Solves `L du - db = rhs` with `mean(du) = 0` at the state of `op`.
pub fn krylov_solve(
    op: &OperatorOutput,
    a: &OneFormField,
    rhs: &ComplexScalarField,
    cfg: &SolverConfig,
) -> Result<BorderedSolve, SolverError> {
    rhs.require_real()?;
    let lin = Linearization::new(op, a)?;
    let out = bordered_solve(&lin, &rhs.re(), cfg);
    if !out.converged {
        return Err(SolverError::Krylov {
            achieved: out.rel_residual,
            iterations: out.iterations,
        });
    }
    Ok(out)
}
