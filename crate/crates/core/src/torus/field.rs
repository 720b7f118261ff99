use num_complex::Complex64 as C64;

use super::{FieldError, PeriodicGrid};
use crate::hermitian::SmallHerm;

/// Relative tolerance for the realness and Hermitian-symmetry invariants.
pub const REAL_TOL: f64 = 1e-12;

/// Grid samples of a complex function, optionally flagged real.
///
/// A field flagged real stores exactly zero imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexScalarField {
    grid: PeriodicGrid,
    values: Vec<C64>,
    real: bool,
}

impl ComplexScalarField {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &PeriodicGrid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![C64::new(c, 0.0); grid.len()],
            real: true,
        }
    }

    pub fn from_real(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self, FieldError> {
        check_len(grid, values.len())?;
        Ok(Self {
            grid: grid.clone(),
            values: values.into_iter().map(|v| C64::new(v, 0.0)).collect(),
            real: true,
        })
    }

    pub fn from_complex(grid: &PeriodicGrid, values: Vec<C64>) -> Result<Self, FieldError> {
        check_len(grid, values.len())?;
        Ok(Self {
            grid: grid.clone(),
            values,
            real: false,
        })
    }

    /// Complex samples that must be real to within [`REAL_TOL`]; imaginary
    /// parts are dropped after the check.
    pub fn real_from_complex(grid: &PeriodicGrid, values: Vec<C64>) -> Result<Self, FieldError> {
        let mut f = Self::from_complex(grid, values)?;
        f.make_real()?;
        Ok(f)
    }

    pub(crate) fn from_real_unchecked(grid: &PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values: values.into_iter().map(|v| C64::new(v, 0.0)).collect(),
            real: true,
        }
    }

    pub(crate) fn from_complex_unchecked(grid: &PeriodicGrid, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
            real: false,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Real parts of the samples.
    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest imaginary part relative to the field's magnitude.
    pub fn realness_defect(&self) -> (f64, f64) {
        let max_imag = self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        (max_imag, self.max_abs())
    }

    /// Flags the field real if its imaginary parts are within tolerance.
    pub fn make_real(&mut self) -> Result<(), FieldError> {
        if self.real {
            return Ok(());
        }
        let (max_imag, scale) = self.realness_defect();
        if max_imag > REAL_TOL * scale {
            return Err(FieldError::NotReal { max_imag, scale });
        }
        for v in &mut self.values {
            v.im = 0.0;
        }
        self.real = true;
        Ok(())
    }

    pub fn require_real(&self) -> Result<(), FieldError> {
        if self.real {
            Ok(())
        } else {
            let (max_imag, scale) = self.realness_defect();
            Err(FieldError::NotReal { max_imag, scale })
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
            real: self.real,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            real: self.real,
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
            real: self.real,
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a + b * s)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a * b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            real: self.real && other.real,
        })
    }

    /// Largest pointwise distance `|self - other|`.
    pub fn sup_distance(&self, other: &Self) -> Result<f64, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

fn check_len(grid: &PeriodicGrid, found: usize) -> Result<(), FieldError> {
    if found != grid.len() {
        return Err(FieldError::Shape {
            what: "field samples",
            expected: grid.len(),
            found,
        });
    }
    Ok(())
}

/// A `(1,0)`-form `a = a_i dz^i`; the conjugate components are `conj(a_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneFormField {
    grid: PeriodicGrid,
    components: Vec<ComplexScalarField>,
}

impl OneFormField {
    pub fn new(grid: &PeriodicGrid, components: Vec<ComplexScalarField>) -> Result<Self, FieldError> {
        if components.len() != grid.n() {
            return Err(FieldError::Shape {
                what: "one-form components",
                expected: grid.n(),
                found: components.len(),
            });
        }
        if components.iter().any(|c| c.grid() != grid) {
            return Err(FieldError::GridMismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            components,
        })
    }

    pub fn zero(grid: &PeriodicGrid) -> Self {
        let components = (0..grid.n())
            .map(|_| ComplexScalarField::from_complex_unchecked(grid, vec![C64::new(0.0, 0.0); grid.len()]))
            .collect();
        Self {
            grid: grid.clone(),
            components,
        }
    }

    /// Constant coefficients `a_i`.
    pub fn constant(grid: &PeriodicGrid, coeffs: &[C64]) -> Result<Self, FieldError> {
        let components = coeffs
            .iter()
            .map(|&c| ComplexScalarField::from_complex_unchecked(grid, vec![c; grid.len()]))
            .collect();
        Self::new(grid, components)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn components(&self) -> &[ComplexScalarField] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ComplexScalarField {
        &self.components[i]
    }

    /// `a_i` at point `p`.
    #[inline]
    pub fn at(&self, i: usize, p: usize) -> C64 {
        self.components[i].values()[p]
    }

    pub fn is_zero(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.values().iter().all(|v| v.norm() == 0.0))
    }
}

/// Pointwise `n x n` Hermitian matrices, stored row-major per point.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrixField {
    grid: PeriodicGrid,
    data: Vec<C64>,
}

impl HermitianMatrixField {
    pub fn identity(grid: &PeriodicGrid) -> Self {
        let n = grid.n();
        let mut data = vec![C64::new(0.0, 0.0); grid.len() * n * n];
        for block in data.chunks_mut(n * n) {
            for i in 0..n {
                block[i * n + i] = C64::new(1.0, 0.0);
            }
        }
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        let n = grid.n();
        Self {
            grid: grid.clone(),
            data: vec![C64::new(0.0, 0.0); grid.len() * n * n],
        }
    }

    /// Builds from raw row-major data, checking the Hermitian invariant at
    /// relative tolerance [`REAL_TOL`].
    pub fn from_data(grid: &PeriodicGrid, data: Vec<C64>) -> Result<Self, FieldError> {
        let n = grid.n();
        if data.len() != grid.len() * n * n {
            return Err(FieldError::Shape {
                what: "matrix entries",
                expected: grid.len() * n * n,
                found: data.len(),
            });
        }
        let f = Self {
            grid: grid.clone(),
            data,
        };
        let defect = f.hermitian_defect();
        if defect > REAL_TOL {
            return Err(FieldError::NotHermitian { defect });
        }
        Ok(f)
    }

    pub(crate) fn from_data_unchecked(grid: &PeriodicGrid, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), grid.len() * grid.n() * grid.n());
        Self {
            grid: grid.clone(),
            data,
        }
    }

    /// Builds from per-point matrices.
    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(usize) -> SmallHerm) -> Self {
        let n = grid.n();
        let mut data = Vec::with_capacity(grid.len() * n * n);
        for p in 0..grid.len() {
            let m = f(p);
            for i in 0..n {
                for j in 0..n {
                    data.push(m.get(i, j));
                }
            }
        }
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn entry(&self, p: usize, i: usize, j: usize) -> C64 {
        let n = self.grid.n();
        self.data[p * n * n + i * n + j]
    }

    /// The matrix at point `p`.
    #[inline]
    pub fn at(&self, p: usize) -> SmallHerm {
        let n = self.grid.n();
        SmallHerm::from_row_major(n, &self.data[p * n * n..(p + 1) * n * n])
    }

    /// Entry `(i, j)` as a scalar field.
    pub fn entry_field(&self, i: usize, j: usize) -> ComplexScalarField {
        let values = (0..self.grid.len()).map(|p| self.entry(p, i, j)).collect();
        ComplexScalarField::from_complex_unchecked(&self.grid, values)
    }

    /// `max |m_ij - conj(m_ji)| / max(1, max |m|)` over all points.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut worst = 0.0f64;
        let mut scale = 1.0f64;
        for block in self.data.chunks(n * n) {
            for i in 0..n {
                for j in 0..n {
                    let d = (block[i * n + j] - block[j * n + i].conj()).norm();
                    worst = worst.max(d);
                    scale = scale.max(block[i * n + j].norm());
                }
            }
        }
        worst / scale
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}
