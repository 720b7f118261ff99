//! Uniform periodic grid on the flat torus `C^n / (Z^n + iZ^n)`.
//!
//! Real axes are ordered `(x_1, y_1, ..., x_n, y_n)` with `z_k = x_k + i y_k`.
//! Storage is row-major with axis 0 (`x_1`) fastest.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::FieldError;

/// Largest supported complex dimension.
pub const MAX_DIM: usize = 3;

/// Discretization of the torus with `res[p]` points on real axis `p`.
#[derive(Clone)]
pub struct PeriodicGrid {
    inner: Arc<GridInner>,
}

struct GridInner {
    n: usize,
    res: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    symbols: OnceLock<Symbols>,
}

/// Fourier multipliers of the complex derivatives, tabulated per mode.
pub(crate) struct Symbols {
    /// `sigma_k(m)`, the multiplier of `d/dz_k`. The multiplier of
    /// `d/dzbar_k` is `-conj(sigma_k)`.
    pub holo: Vec<Vec<C64>>,
    /// Multiplier of `d/dz_i d/dzbar_j` for `i <= j`, in `pair_index` order.
    pub hess: Vec<Vec<C64>>,
    /// Keep-mask of the 2/3 truncation rule.
    pub dealias: Vec<bool>,
}

/// Position of `(i, j)`, `i <= j`, in the packed upper triangle of an `n x n` matrix.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * (i + 1) / 2 + j
}

impl PeriodicGrid {
    /// Grid with independent resolutions on each of the `2n` real axes.
    pub fn new(n: usize, res: Vec<usize>) -> Result<Self, FieldError> {
        if n == 0 || n > MAX_DIM {
            return Err(FieldError::InvalidDimension(n));
        }
        if res.len() != 2 * n {
            return Err(FieldError::AxisCount {
                expected: 2 * n,
                found: res.len(),
            });
        }
        for (axis, &r) in res.iter().enumerate() {
            if r < 4 || r % 2 != 0 {
                return Err(FieldError::InvalidResolution { axis, res: r });
            }
        }
        let mut strides = Vec::with_capacity(res.len());
        let mut len = 1usize;
        for &r in &res {
            strides.push(len);
            len = len
                .checked_mul(r)
                .ok_or(FieldError::InvalidResolution { axis: strides.len() - 1, res: r })?;
        }
        let mut planner = FftPlanner::new();
        let forward = res.iter().map(|&r| planner.plan_fft_forward(r)).collect();
        let inverse = res.iter().map(|&r| planner.plan_fft_inverse(r)).collect();
        Ok(Self {
            inner: Arc::new(GridInner {
                n,
                res,
                strides,
                len,
                forward,
                inverse,
                symbols: OnceLock::new(),
            }),
        })
    }

    /// Same resolution on every axis.
    pub fn uniform(n: usize, res: usize) -> Result<Self, FieldError> {
        Self::new(n, vec![res; 2 * n])
    }

    /// Complex dimension.
    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn res(&self) -> &[usize] {
        &self.inner.res
    }

    pub fn axes(&self) -> usize {
        2 * self.inner.n
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    pub fn strides(&self) -> &[usize] {
        &self.inner.strides
    }

    /// Per-axis integer index of the linear point index `idx`.
    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for (p, &r) in self.inner.res.iter().enumerate() {
            out[p] = idx % r;
            idx /= r;
        }
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.inner.strides)
            .map(|(m, s)| m * s)
            .sum()
    }

    /// Real coordinates `j_p / res_p` of the point `idx`.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let mut multi = vec![0; self.axes()];
        self.multi_index(idx, &mut multi);
        multi
            .iter()
            .zip(&self.inner.res)
            .map(|(&j, &r)| j as f64 / r as f64)
            .collect()
    }

    /// Wavenumber of FFT bin `j` on an axis of length `r`; Nyquist maps to `-r/2`.
    pub fn wavenumber(j: usize, r: usize) -> i64 {
        if j < r / 2 {
            j as i64
        } else {
            j as i64 - r as i64
        }
    }

    /// Wavenumber used by odd-order derivatives: Nyquist bin zeroed.
    pub fn odd_wavenumber(j: usize, r: usize) -> i64 {
        if j == r / 2 {
            0
        } else {
            Self::wavenumber(j, r)
        }
    }

    pub(crate) fn symbols(&self) -> &Symbols {
        self.inner.symbols.get_or_init(|| self.build_symbols())
    }

    fn build_symbols(&self) -> Symbols {
        use std::f64::consts::PI;
        let n = self.n();
        let len = self.len();
        let res = self.res().to_vec();
        let npairs = n * (n + 1) / 2;
        let mut holo = vec![vec![C64::new(0.0, 0.0); len]; n];
        let mut hess = vec![vec![C64::new(0.0, 0.0); len]; npairs];
        let mut dealias = vec![true; len];
        let mut multi = vec![0usize; 2 * n];
        for idx in 0..len {
            self.multi_index(idx, &mut multi);
            let mut odd = [0.0f64; 2 * MAX_DIM];
            let mut full = [0.0f64; 2 * MAX_DIM];
            for p in 0..2 * n {
                odd[p] = Self::odd_wavenumber(multi[p], res[p]) as f64;
                full[p] = Self::wavenumber(multi[p], res[p]) as f64;
                if 3 * full[p].abs() as usize > res[p] {
                    dealias[idx] = false;
                }
            }
            for k in 0..n {
                // d/dz = (d/dx - i d/dy) / 2  ->  pi (i m_x + m_y)
                holo[k][idx] = C64::new(odd[2 * k + 1], odd[2 * k]) * PI;
            }
            for i in 0..n {
                for j in i..n {
                    let h = if i == j {
                        // (d_xx + d_yy) / 4 keeps the Nyquist bin
                        C64::new(-PI * PI * (full[2 * i].powi(2) + full[2 * i + 1].powi(2)), 0.0)
                    } else {
                        holo[i][idx] * (-holo[j][idx].conj())
                    };
                    hess[pair_index(n, i, j)][idx] = h;
                }
            }
        }
        Symbols {
            holo,
            hess,
            dealias,
        }
    }

    /// In-place unnormalized forward DFT over all axes.
    pub fn fft_forward(&self, data: &mut [C64]) {
        self.transform(data, &self.inner.forward);
    }

    /// In-place inverse DFT over all axes, normalized so that
    /// `fft_inverse(fft_forward(x)) == x`.
    pub fn fft_inverse(&self, data: &mut [C64]) {
        self.transform(data, &self.inner.inverse);
        let scale = 1.0 / self.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len(), "field length does not match grid");
        for (axis, plan) in plans.iter().enumerate() {
            let r = self.inner.res[axis];
            let stride = self.inner.strides[axis];
            if stride == 1 {
                data.par_chunks_mut(r * 64).for_each(|chunk| {
                    let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
                    plan.process_with_scratch(chunk, &mut scratch);
                });
                continue;
            }
            // Each block of `r * stride` contiguous values holds `stride`
            // interleaved lines along this axis.
            let block = r * stride;
            data.par_chunks_mut(block).for_each(|blk| {
                let mut lines = vec![C64::new(0.0, 0.0); block];
                for j in 0..r {
                    let row = &blk[j * stride..(j + 1) * stride];
                    for (i, &v) in row.iter().enumerate() {
                        lines[i * r + j] = v;
                    }
                }
                lines.par_chunks_mut(r * 16).for_each(|c| {
                    let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
                    plan.process_with_scratch(c, &mut scratch);
                });
                for j in 0..r {
                    let row = &mut blk[j * stride..(j + 1) * stride];
                    for (i, v) in row.iter_mut().enumerate() {
                        *v = lines[i * r + j];
                    }
                }
            });
        }
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.res == other.inner.res)
    }
}

impl Eq for PeriodicGrid {}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("n", &self.inner.n)
            .field("res", &self.inner.res)
            .finish()
    }
}
