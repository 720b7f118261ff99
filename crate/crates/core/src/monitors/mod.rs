//! Quantities controlled by the a-priori estimates, observed on solutions.

mod eigen;
mod probe;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operator::{gradient_from_spectrum, gradient_term, OperatorError, ProblemData};
use crate::solver::{Solution, SolverError};
use crate::torus::calculus::spectrum;
use crate::torus::{
    complex_derivative, complex_hessian, reduce, ComplexScalarField, DerivativeKind, FieldError,
    Reduction,
};

pub use eigen::{eigen_survey, eigenvalue_derivative_check, EigenCheck, EigenSurvey, EIGEN_CHECK_STEP};
pub use probe::{uniqueness_probe, uniqueness_probe_against, ProbeReport, ProbeTrial};

/// Bound on `sup |dbar_j a_i|` for `a` to count as holomorphic.
pub const HOLOMORPHY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("one-form is not holomorphic: sup |dbar a| = {defect:e}")]
    NotHolomorphic { defect: f64 },
    #[error("top eigenvalue is not simple: gap {gap:e}")]
    NearDegenerate { gap: f64 },
    #[error("point {point} or axis {axis} out of range")]
    OutOfRange { point: usize, axis: usize },
}

impl From<FieldError> for MonitorError {
    fn from(e: FieldError) -> Self {
        MonitorError::Operator(e.into())
    }
}

/// Serialized as a flat JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateReport {
    pub sup_abs_u: f64,
    /// `sup |du|^2_g`.
    pub grad_sup_sq: f64,
    /// `grad_sup_sq + 1`.
    #[serde(rename = "K")]
    pub k: f64,
    /// Largest eigenvalue of `gt` relative to `g`, maximized over points.
    pub lambda1_max: f64,
    /// `sup |i ddbar u|_g`, Frobenius norm of `g^{-1/2} Hess g^{-1/2}`.
    pub hessian_sup: f64,
    /// `hessian_sup / K`.
    pub c2_ratio: f64,
    /// `sup |F| - |b|`.
    pub b_bound_slack: f64,
    /// Present when `a` is holomorphic.
    pub aeppli_defect: Option<f64>,
    #[serde(rename = "sup_F")]
    pub sup_f: f64,
}

impl EstimateReport {
    pub fn is_finite(&self) -> bool {
        [
            self.sup_abs_u,
            self.grad_sup_sq,
            self.k,
            self.lambda1_max,
            self.hessian_sup,
            self.c2_ratio,
            self.b_bound_slack,
            self.sup_f,
        ]
        .iter()
        .chain(self.aeppli_defect.iter())
        .all(|v| v.is_finite())
    }
}

fn sup(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

pub fn estimate_report(p: &ProblemData, sol: &Solution) -> Result<EstimateReport, MonitorError> {
    let u = &sol.u;
    let grid = p.grid();
    let n = grid.n();
    let grad = gradient_from_spectrum(grid, &spectrum(u));
    let hess = complex_hessian(u)?;
    let term = gradient_term(p.a(), u)?;
    let per_point: Vec<(f64, f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|q| {
            let g = p.g().at(q);
            let ginv = g.inverse().expect("reference metric is positive definite");
            // g^{i jbar} u_i u_jbar with g^{i jbar} = ginv[j][i]
            let mut grad_sq = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    grad_sq += ginv.get(j, i) * grad[i][q] * grad[j][q].conj();
                }
            }
            let l = g.cholesky().expect("reference metric is positive definite");
            let hess_norm = hess.at(q).congruence_by_inverse(&l).frobenius();
            let gt = g.add(&term.at(q));
            let lambda1 = gt.relative_eigenvalues(&g).expect("positive definite")[0];
            (grad_sq.re, hess_norm, lambda1)
        })
        .collect();
    let grad_sup_sq = sup(per_point.iter().map(|v| v.0));
    let hessian_sup = sup(per_point.iter().map(|v| v.1));
    let lambda1_max = per_point.iter().map(|v| v.2).fold(f64::NEG_INFINITY, f64::max);
    let k = grad_sup_sq + 1.0;
    let sup_f = reduce(p.f(), Reduction::SupAbs)?;
    let aeppli = match aeppli_defect(p, u) {
        Ok(d) => Some(d),
        Err(MonitorError::NotHolomorphic { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(EstimateReport {
        sup_abs_u: reduce(u, Reduction::SupAbs)?,
        grad_sup_sq,
        k,
        lambda1_max,
        hessian_sup,
        c2_ratio: hessian_sup / k,
        b_bound_slack: sup_f - sol.b.abs(),
        aeppli_defect: aeppli,
        sup_f,
    })
}

/// `sup |dbar_j a_i|` over all components and directions.
pub fn holomorphy_defect(p: &ProblemData) -> Result<f64, MonitorError> {
    let n = p.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = complex_derivative(p.a().component(i), j, DerivativeKind::Antiholomorphic)?;
            worst = worst.max(d.max_abs());
        }
    }
    Ok(worst)
}

/// `sup |(gt - g) - (d conj(gamma) + dbar gamma)|` with
/// `gamma_k = -i (u a_k + u_k / 2)`, over all matrix entries.
///
/// The `u_k / 2` part contributes `d_j dbar_k u`, taken with the Hessian
/// symbol so that the Nyquist bin is treated as in the operator.
pub fn aeppli_defect(p: &ProblemData, u: &ComplexScalarField) -> Result<f64, MonitorError> {
    let defect = holomorphy_defect(p)?;
    if defect > HOLOMORPHY_TOL {
        return Err(MonitorError::NotHolomorphic { defect });
    }
    let n = p.n();
    let minus_i = C64::new(0.0, -1.0);
    // gamma_k = -i u a_k + (-i / 2) u_k
    let mut lower = Vec::with_capacity(n);
    for k in 0..n {
        let vals = u.values().iter().zip(p.a().component(k).values()).map(|(u, a)| minus_i * u * a).collect();
        lower.push(ComplexScalarField::from_complex(p.grid(), vals)?);
    }
    let hess = complex_hessian(u)?;
    let term = gradient_term(p.a(), u)?;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            // (1,1) part of d conj(gamma) + dbar gamma, in the normalization of i gt dz^j ^ dzbar^k
            let a = complex_derivative(&lower[k].conj(), j, DerivativeKind::Holomorphic)?;
            let b = complex_derivative(&lower[j], k, DerivativeKind::Antiholomorphic)?;
            for (q, (a, b)) in a.values().iter().zip(b.values()).enumerate() {
                let m = minus_i * (a - b) + hess.entry(q, j, k);
                worst = worst.max((term.entry(q, j, k) - m).norm());
            }
        }
    }
    Ok(worst)
}
