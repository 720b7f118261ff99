//! Continuation in `t` from `(u, b) = (0, 0)` for the family
//! `log det gt(u) - log det g = t F + b`, with a bordered Newton-Krylov
//! iteration on `(u, b)` at each `t`.

mod continuation;
mod gmres;
mod kernel;
mod krylov;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operator::OperatorError;
use crate::torus::{ComplexScalarField, FieldError};

pub use continuation::{continuity_solve, newton_solve_at_t, normalize_sup, Solution};
pub use gmres::{gmres, GmresOutcome};
pub use kernel::{kernel_density, kernel_density_with};
pub use krylov::{krylov_solve, BorderedSolve};

/// Smallest homotopy step as a fraction of the span.
pub const MIN_STEP: f64 = 1.0 / 1024.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Initial number of uniform homotopy steps.
    pub t_steps: usize,
    /// Sup-norm residual tolerance.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Relative residual tolerance of the linear solves.
    pub krylov_tol: f64,
    pub krylov_max: usize,
    pub krylov_restart: usize,
    /// An accepted step keeps at least this fraction of the positivity margin.
    pub eig_floor: f64,
    /// Smallest line-search damping factor.
    pub damping_min: f64,
    /// Secant extrapolation in `t` for the initial guess.
    pub secant: bool,
    /// 2/3-rule truncation of residuals and updates.
    pub dealias: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t_steps: 4,
            newton_tol: 1e-11,
            max_newton: 25,
            krylov_tol: 1e-12,
            krylov_max: 400,
            krylov_restart: 60,
            eig_floor: 0.1,
            damping_min: 1.0 / 64.0,
            secant: false,
            dealias: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("newton_tol", self.newton_tol),
            ("krylov_tol", self.krylov_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("t_steps", self.t_steps),
            ("max_newton", self.max_newton),
            ("krylov_max", self.krylov_max),
            ("krylov_restart", self.krylov_restart),
        ] {
            if v == 0 {
                return Err(format!("{name} must be at least 1"));
            }
        }
        if !(self.damping_min > 0.0 && self.damping_min <= 1.0) {
            return Err(format!("damping_min must lie in (0, 1], got {}", self.damping_min));
        }
        if !(self.eig_floor >= 0.0 && self.eig_floor < 1.0) {
            return Err(format!("eig_floor must lie in [0, 1), got {}", self.eig_floor));
        }
        Ok(())
    }
}

/// A point `(t, u_t, b_t)` on the continuation path.
#[derive(Clone, Debug)]
pub struct SolveState {
    pub t: f64,
    pub u: ComplexScalarField,
    pub b: f64,
    /// `sup |r|`.
    pub residual_norm: f64,
    pub min_eig: f64,
    pub newton_iters: usize,
}

impl SolveState {
    pub fn summary(&self) -> StateSummary {
        StateSummary {
            t: self.t,
            b: self.b,
            residual_norm: self.residual_norm,
            min_eig: self.min_eig,
            newton_iters: self.newton_iters,
        }
    }
}

/// `SolveState` without the field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub t: f64,
    pub b: f64,
    pub residual_norm: f64,
    pub min_eig: f64,
    pub newton_iters: usize,
}

/// One Newton iteration, printed as `t newton_iter residual_sup min_eig b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub newton_iter: usize,
    pub residual_sup: f64,
    pub min_eig: f64,
    pub b: f64,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.17e} {} {:.17e} {:.17e} {:.17e}",
            self.t, self.newton_iter, self.residual_sup, self.min_eig, self.b
        )
    }
}

impl std::str::FromStr for TraceRecord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tok: Vec<&str> = s.split_whitespace().collect();
        if tok.len() != 5 {
            return Err(format!("expected 5 columns, found {}", tok.len()));
        }
        let f = |i: usize| tok[i].parse::<f64>().map_err(|e| format!("column {}: {e}", i + 1));
        Ok(Self {
            t: f(0)?,
            newton_iter: tok[1].parse().map_err(|e| format!("column 2: {e}"))?,
            residual_sup: f(2)?,
            min_eig: f(3)?,
            b: f(4)?,
        })
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("linear solve stalled after {iterations} iterations at relative residual {achieved:e}")]
    Krylov { achieved: f64, iterations: usize },
    #[error("Newton did not converge at t = {t} after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { t: f64, iterations: usize, residual: f64 },
    #[error("line search failed at t = {t} (residual {residual:e}, damping below {damping_min})")]
    LineSearch { t: f64, residual: f64, damping_min: f64 },
    #[error("homotopy step underflow at t = {} (step {step:e}): {cause}", last.t)]
    StepUnderflow {
        step: f64,
        last: Box<SolveState>,
        trace: Vec<TraceRecord>,
        cause: String,
    },
    #[error("kernel density stagnated at defect {defect:e}")]
    KernelStagnation { defect: f64 },
    #[error("kernel density is not positive (min {min:e})")]
    KernelNotPositive { min: f64 },
}

impl From<FieldError> for SolverError {
    fn from(e: FieldError) -> Self {
        SolverError::Operator(e.into())
    }
}

impl SolverError {
    /// Failures that a smaller homotopy step may cure.
    pub fn is_step_failure(&self) -> bool {
        matches!(
            self,
            SolverError::Krylov { .. }
                | SolverError::NewtonDiverged { .. }
                | SolverError::LineSearch { .. }
                | SolverError::Operator(OperatorError::Degenerate { .. })
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            damping_min: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            newton_tol: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trace_record_round_trips() {
        let r = TraceRecord {
            t: 0.25,
            newton_iter: 3,
            residual_sup: 1.5e-12,
            min_eig: 0.875,
            b: -0.1,
        };
        let back: TraceRecord = r.to_string().parse().unwrap();
        assert_eq!(back, r);
        assert!("1 2 3".parse::<TraceRecord>().is_err());
    }
}
