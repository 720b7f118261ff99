//! Flat complex tori: periodic grids, sampled fields and exact spectral
//! complex calculus on trigonometric data.

pub(crate) mod calculus;
mod field;
pub mod format;
mod grid;
mod trig;

pub use calculus::{
    axis_derivative, complex_derivative, complex_hessian, dealias, reduce, DerivativeKind,
    Reduction,
};
pub use field::{ComplexScalarField, HermitianMatrixField, OneFormField, REAL_TOL};
pub use grid::{pair_index, PeriodicGrid, MAX_DIM};
pub use trig::{sample_field, Phase, TrigExpression, TrigTerm};


use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("complex dimension {0} is outside 1..=3")]
    InvalidDimension(usize),
    #[error("expected {expected} real axes, found {found}")]
    AxisCount { expected: usize, found: usize },
    #[error("axis {axis}: resolution {res} must be even and at least 4")]
    InvalidResolution { axis: usize, res: usize },
    #[error("term {term}: wavevector has {found} components, grid has {expected} axes")]
    WavevectorLength {
        term: usize,
        expected: usize,
        found: usize,
    },
    #[error("term {term}: wavenumber {k} on axis {axis} is not resolvable with {res} points (need |k| < {half})", half = res / 2)]
    Unresolvable {
        term: usize,
        axis: usize,
        k: i64,
        res: usize,
    },
    #[error("field is not real: max |imag| = {max_imag:e} against scale {scale:e}")]
    NotReal { max_imag: f64, scale: f64 },
    #[error("matrix field is not Hermitian: defect {defect:e}")]
    NotHermitian { defect: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("{what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("complex index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
