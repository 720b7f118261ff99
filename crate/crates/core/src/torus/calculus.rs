//! Fourier-spectral complex derivatives on the torus.
//!
//! With `d/dz_k = (d/dx_k - i d/dy_k)/2` a mode `exp(2 pi i m.xi)` is
//! multiplied by `pi (i m_x + m_y)`; `d/dzbar_k` by `pi (i m_x - m_y)`.
//! First derivatives and mixed second derivatives across different axes
//! drop the Nyquist bin; pure second derivatives `d_xx`, `d_yy` keep it, so
//! the discrete Laplacian is invertible on every non-constant mode.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::grid::pair_index;
use super::{ComplexScalarField, FieldError, HermitianMatrixField, PeriodicGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeKind {
    /// `d/dz_k`
    Holomorphic,
    /// `d/dzbar_k`
    Antiholomorphic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sup,
    SupAbs,
    Min,
}

/// Forward transform of the samples.
pub(crate) fn spectrum(f: &ComplexScalarField) -> Vec<C64> {
    let mut hat = f.values().to_vec();
    f.grid().fft_forward(&mut hat);
    hat
}

/// `IFFT(symbol * hat)`.
pub(crate) fn apply_symbol(grid: &PeriodicGrid, hat: &[C64], symbol: &[C64]) -> Vec<C64> {
    let mut out: Vec<C64> = hat.par_iter().zip(symbol).map(|(h, s)| h * s).collect();
    grid.fft_inverse(&mut out);
    out
}

/// Multiplier of `d/dzbar_k` from that of `d/dz_k`.
#[inline]
pub(crate) fn anti(sigma: C64) -> C64 {
    -sigma.conj()
}

pub fn complex_derivative(
    f: &ComplexScalarField,
    index: usize,
    kind: DerivativeKind,
) -> Result<ComplexScalarField, FieldError> {
    let grid = f.grid();
    if index >= grid.n() {
        return Err(FieldError::IndexOutOfRange { index, n: grid.n() });
    }
    let hat = spectrum(f);
    let sigma = &grid.symbols().holo[index];
    let out = match kind {
        DerivativeKind::Holomorphic => apply_symbol(grid, &hat, sigma),
        DerivativeKind::Antiholomorphic => {
            let sym: Vec<C64> = sigma.iter().map(|&s| anti(s)).collect();
            apply_symbol(grid, &hat, &sym)
        }
    };
    Ok(ComplexScalarField::from_complex_unchecked(grid, out))
}

/// Derivative along real axis `axis` (Nyquist bin dropped).
pub fn axis_derivative(f: &ComplexScalarField, axis: usize) -> Result<ComplexScalarField, FieldError> {
    let grid = f.grid();
    if axis >= grid.axes() {
        return Err(FieldError::IndexOutOfRange { index: axis, n: grid.axes() });
    }
    let hat = spectrum(f);
    let res = grid.res()[axis];
    let stride = grid.strides()[axis];
    let sym: Vec<C64> = (0..grid.len())
        .map(|idx| {
            let j = (idx / stride) % res;
            C64::new(0.0, 2.0 * PI * PeriodicGrid::odd_wavenumber(j, res) as f64)
        })
        .collect();
    let mut out = ComplexScalarField::from_complex_unchecked(grid, apply_symbol(grid, &hat, &sym));
    if f.is_real() {
        // derivative of a real field is real up to rounding
        let _ = out.make_real();
    }
    Ok(out)
}

/// `u_{i jbar} = d/dz_i d/dzbar_j u` for real `u`.
pub fn complex_hessian(u: &ComplexScalarField) -> Result<HermitianMatrixField, FieldError> {
    u.require_real()?;
    let grid = u.grid();
    let hat = spectrum(u);
    let entries = hessian_entries(grid, &hat);
    Ok(pack_hermitian(grid, &entries))
}

/// Upper-triangle Hessian entries in `pair_index` order from the spectrum of a real field.
pub(crate) fn hessian_entries(grid: &PeriodicGrid, hat: &[C64]) -> Vec<Vec<C64>> {
    let n = grid.n();
    let sym = grid.symbols();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut e = apply_symbol(grid, hat, &sym.hess[pair_index(n, i, j)]);
            if i == j {
                for v in &mut e {
                    v.im = 0.0;
                }
            }
            out.push(e);
        }
    }
    out
}

/// Hermitian field from packed upper-triangle entries.
pub(crate) fn pack_hermitian(grid: &PeriodicGrid, upper: &[Vec<C64>]) -> HermitianMatrixField {
    let n = grid.n();
    let mut data = vec![C64::new(0.0, 0.0); grid.len() * n * n];
    data.par_chunks_mut(n * n).enumerate().for_each(|(p, block)| {
        for i in 0..n {
            for j in i..n {
                let v = upper[pair_index(n, i, j)][p];
                block[i * n + j] = v;
                block[j * n + i] = v.conj();
            }
        }
    });
    HermitianMatrixField::from_data_unchecked(grid, data)
}

/// Mean, supremum, supremum of modulus, or minimum over the grid.
///
/// `Sup` and `Min` require a real field; `Mean` of a complex field returns
/// the mean of the real parts.
pub fn reduce(f: &ComplexScalarField, mode: Reduction) -> Result<f64, FieldError> {
    let vals = f.values();
    Ok(match mode {
        Reduction::Mean => vals.iter().map(|v| v.re).sum::<f64>() / vals.len() as f64,
        Reduction::SupAbs => vals.iter().map(|v| v.norm()).fold(0.0, f64::max),
        Reduction::Sup => {
            f.require_real()?;
            vals.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max)
        }
        Reduction::Min => {
            f.require_real()?;
            vals.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
        }
    })
}

/// 2/3-rule truncation: zero every mode with `3|m_p| > res_p` on some axis.
pub fn dealias(f: &ComplexScalarField) -> ComplexScalarField {
    let grid = f.grid();
    let mut hat = spectrum(f);
    dealias_spectrum(grid, &mut hat);
    grid.fft_inverse(&mut hat);
    let mut out = ComplexScalarField::from_complex_unchecked(grid, hat);
    if f.is_real() {
        let _ = out.make_real();
    }
    out
}

pub(crate) fn dealias_spectrum(grid: &PeriodicGrid, hat: &mut [C64]) {
    let keep = &grid.symbols().dealias;
    for (h, &k) in hat.iter_mut().zip(keep) {
        if !k {
            *h = C64::new(0.0, 0.0);
        }
    }
}
