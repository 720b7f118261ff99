use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ComplexScalarField, FieldError, PeriodicGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cos,
    Sin,
}

/// `amplitude * trig(2 pi k . xi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub wavevector: Vec<i64>,
    pub phase: Phase,
}

/// Finite real trigonometric polynomial on the torus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrigExpression {
    pub terms: Vec<TrigTerm>,
}

impl TrigTerm {
    pub fn new(amplitude: f64, wavevector: Vec<i64>, phase: Phase) -> Self {
        Self {
            amplitude,
            wavevector,
            phase,
        }
    }

    pub fn cos(amplitude: f64, wavevector: Vec<i64>) -> Self {
        Self::new(amplitude, wavevector, Phase::Cos)
    }

    pub fn sin(amplitude: f64, wavevector: Vec<i64>) -> Self {
        Self::new(amplitude, wavevector, Phase::Sin)
    }

    fn angle(&self, xi: &[f64]) -> f64 {
        2.0 * PI
            * self
                .wavevector
                .iter()
                .zip(xi)
                .map(|(&k, &x)| k as f64 * x)
                .sum::<f64>()
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        let th = self.angle(xi);
        match self.phase {
            Phase::Cos => self.amplitude * th.cos(),
            Phase::Sin => self.amplitude * th.sin(),
        }
    }

    /// Derivative along real axis `axis`.
    pub fn eval_axis_derivative(&self, xi: &[f64], axis: usize) -> f64 {
        let th = self.angle(xi);
        let w = 2.0 * PI * self.wavevector[axis] as f64;
        match self.phase {
            Phase::Cos => -self.amplitude * w * th.sin(),
            Phase::Sin => self.amplitude * w * th.cos(),
        }
    }

    fn is_constant(&self) -> bool {
        self.wavevector.iter().all(|&k| k == 0)
    }
}

impl TrigExpression {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// The constant `c` on a torus with `axes` real axes.
    pub fn constant(c: f64, axes: usize) -> Self {
        Self::new(vec![TrigTerm::cos(c, vec![0; axes])])
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(xi)).sum()
    }

    pub fn eval_axis_derivative(&self, xi: &[f64], axis: usize) -> f64 {
        self.terms
            .iter()
            .map(|t| t.eval_axis_derivative(xi, axis))
            .sum()
    }

    /// Mean over the torus: the sum of the amplitudes of constant cosine terms.
    pub fn constant_term(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.is_constant() && t.phase == Phase::Cos)
            .map(|t| t.amplitude)
            .sum()
    }

    /// Checks wavevector lengths and `|k_p| < res_p / 2` on every axis.
    pub fn check_resolvable(&self, grid: &PeriodicGrid) -> Result<(), FieldError> {
        for (term, t) in self.terms.iter().enumerate() {
            if t.wavevector.len() != grid.axes() {
                return Err(FieldError::WavevectorLength {
                    term,
                    expected: grid.axes(),
                    found: t.wavevector.len(),
                });
            }
            for (axis, (&k, &res)) in t.wavevector.iter().zip(grid.res()).enumerate() {
                if 2 * k.unsigned_abs() as usize >= res {
                    return Err(FieldError::Unresolvable { term, axis, k, res });
                }
            }
        }
        Ok(())
    }
}

/// Pointwise evaluation of `expr` at the grid coordinates.
pub fn sample_field(expr: &TrigExpression, grid: &PeriodicGrid) -> Result<ComplexScalarField, FieldError> {
    expr.check_resolvable(grid)?;
    let values = (0..grid.len())
        .map(|idx| expr.eval(&grid.coords(idx)))
        .collect();
    ComplexScalarField::from_real(grid, values)
}
