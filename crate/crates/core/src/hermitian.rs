//! Fixed-size (n <= 3) complex Hermitian matrix kernels.
//!
//! Eigenvalues, determinants and inverses use closed forms for `n <= 2` and a
//! cyclic Jacobi decomposition for `n = 3`.

use num_complex::Complex64 as C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Off-diagonal Frobenius mass, relative to the full norm, at which the
/// Jacobi sweeps stop.
pub const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 60;

type Block = [[C64; 3]; 3];

/// An `n x n` Hermitian matrix, `n <= 3`. Entries outside `n x n` are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallHerm {
    n: usize,
    m: Block,
}

/// Eigen-decomposition with eigenvalues in descending order; column `k` of
/// `vectors` is the unit eigenvector of `values[k]`.
#[derive(Clone, Copy, Debug)]
pub struct Eigh {
    pub n: usize,
    pub values: [f64; 3],
    pub vectors: [[C64; 3]; 3],
}

impl Eigh {
    pub fn vector(&self, k: usize) -> [C64; 3] {
        [self.vectors[0][k], self.vectors[1][k], self.vectors[2][k]]
    }
}

/// Result of the pointwise analysis used in operator assembly.
#[derive(Clone, Copy, Debug)]
pub struct Analysis {
    pub min_eig: f64,
    /// Present only when the matrix is positive definite.
    pub log_det: Option<f64>,
    pub inverse: Option<SmallHerm>,
}

impl SmallHerm {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n));
        Self { n, m: [[ZERO; 3]; 3] }
    }

    pub fn identity(n: usize) -> Self {
        let mut s = Self::zeros(n);
        for i in 0..n {
            s.m[i][i] = ONE;
        }
        s
    }

    pub fn from_row_major(n: usize, data: &[C64]) -> Self {
        let mut s = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                s.m[i][j] = data[i * n + j];
            }
        }
        s
    }

    /// Diagonal matrix with the given real entries.
    pub fn diag(values: &[f64]) -> Self {
        let mut s = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            s.m[i][i] = C64::new(v, 0.0);
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[i][j]
    }

    /// Sets `(i, j)` and its mirror `(j, i)`; diagonal entries keep only the real part.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        if i == j {
            self.m[i][i] = C64::new(v.re, 0.0);
        } else {
            self.m[i][j] = v;
            self.m[j][i] = v.conj();
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut s = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                s.m[i][j] += other.m[i][j];
            }
        }
        s
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut s = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                s.m[i][j] -= other.m[i][j];
            }
        }
        s
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.m[i][i].re).sum()
    }

    /// `tr(self * other)`; real when both are Hermitian.
    pub fn trace_product(&self, other: &Self) -> f64 {
        let mut acc = ZERO;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.m[i][j] * other.m[j][i];
            }
        }
        acc.re
    }

    pub fn frobenius(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.m[i][j].norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `v^H M v`.
    pub fn quadratic_form(&self, v: &[C64; 3]) -> f64 {
        let mut acc = ZERO;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += v[i].conj() * self.m[i][j] * v[j];
            }
        }
        acc.re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self.n {
            1 => self.m[0][0].re,
            2 => {
                let (lo, _) = eig2(self);
                lo
            }
            _ => {
                let e = self.eigh();
                e.values[self.n - 1]
            }
        }
    }

    pub fn max_eigenvalue(&self) -> f64 {
        match self.n {
            1 => self.m[0][0].re,
            2 => eig2(self).1,
            _ => self.eigh().values[0],
        }
    }

    /// Real determinant.
    pub fn det(&self) -> f64 {
        match self.n {
            1 => self.m[0][0].re,
            2 => self.m[0][0].re * self.m[1][1].re - self.m[0][1].norm_sqr(),
            _ => {
                let e = self.eigh();
                e.values[0] * e.values[1] * e.values[2]
            }
        }
    }

    /// Matrix inverse; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        match self.n {
            1 => {
                let a = self.m[0][0].re;
                (a != 0.0).then(|| Self::diag(&[1.0 / a]))
            }
            2 => {
                let d = self.det();
                if d == 0.0 {
                    return None;
                }
                let mut s = Self::zeros(2);
                s.m[0][0] = C64::new(self.m[1][1].re / d, 0.0);
                s.m[1][1] = C64::new(self.m[0][0].re / d, 0.0);
                s.m[0][1] = -self.m[0][1] / d;
                s.m[1][0] = -self.m[1][0] / d;
                Some(s)
            }
            _ => {
                let e = self.eigh();
                if e.values.iter().take(3).any(|&l| l == 0.0) {
                    return None;
                }
                Some(e.reconstruct(|l| 1.0 / l))
            }
        }
    }

    /// Smallest eigenvalue and, when positive definite, `log det` and the inverse.
    pub fn analyze(&self) -> Analysis {
        match self.n {
            1 | 2 => {
                let min_eig = self.min_eigenvalue();
                if min_eig > 0.0 {
                    Analysis {
                        min_eig,
                        log_det: Some(self.det().ln()),
                        inverse: self.inverse(),
                    }
                } else {
                    Analysis {
                        min_eig,
                        log_det: None,
                        inverse: None,
                    }
                }
            }
            _ => {
                let e = self.eigh();
                let min_eig = e.values[2];
                if min_eig > 0.0 {
                    Analysis {
                        min_eig,
                        log_det: Some(e.values.iter().map(|l| l.ln()).sum()),
                        inverse: Some(e.reconstruct(|l| 1.0 / l)),
                    }
                } else {
                    Analysis {
                        min_eig,
                        log_det: None,
                        inverse: None,
                    }
                }
            }
        }
    }

    /// Lower-triangular Cholesky factor `L` with `self = L L^H`.
    pub fn cholesky(&self) -> Option<[[C64; 3]; 3]> {
        let n = self.n;
        let mut l = [[ZERO; 3]; 3];
        for j in 0..n {
            let mut d = self.m[j][j].re;
            for k in 0..j {
                d -= l[j][k].norm_sqr();
            }
            if d <= 0.0 {
                return None;
            }
            let djj = d.sqrt();
            l[j][j] = C64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = self.m[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k].conj();
                }
                l[i][j] = s / djj;
            }
        }
        Some(l)
    }

    /// `L^{-1} self L^{-H}` for a lower-triangular `L`.
    pub fn congruence_by_inverse(&self, l: &[[C64; 3]; 3]) -> Self {
        let n = self.n;
        // X = L^{-1} M by forward substitution, column by column.
        let mut x = [[ZERO; 3]; 3];
        for c in 0..n {
            for i in 0..n {
                let mut s = self.m[i][c];
                for k in 0..i {
                    s -= l[i][k] * x[k][c];
                }
                x[i][c] = s / l[i][i];
            }
        }
        // Y = X L^{-H}, i.e. Y^H = L^{-1} X^H.
        let mut xh = [[ZERO; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                xh[i][j] = x[j][i].conj();
            }
        }
        let mut yh = [[ZERO; 3]; 3];
        for c in 0..n {
            for i in 0..n {
                let mut s = xh[i][c];
                for k in 0..i {
                    s -= l[i][k] * yh[k][c];
                }
                yh[i][c] = s / l[i][i];
            }
        }
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.m[i][j] = yh[j][i].conj();
            }
            out.m[i][i].im = 0.0;
        }
        out
    }

    /// Eigenvalues of `self` relative to the positive definite `metric`,
    /// i.e. of `metric^{-1} self`, in descending order.
    pub fn relative_eigenvalues(&self, metric: &Self) -> Option<[f64; 3]> {
        let l = metric.cholesky()?;
        Some(self.congruence_by_inverse(&l).eigh().values)
    }

    /// Cyclic Jacobi eigen-decomposition (any `n <= 3`).
    pub fn eigh(&self) -> Eigh {
        let n = self.n;
        let mut a = self.m;
        let mut v = [[ZERO; 3]; 3];
        for (i, row) in v.iter_mut().enumerate().take(n) {
            row[i] = ONE;
        }
        let total = self.frobenius();
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += 2.0 * a[p][q].norm_sqr();
                }
            }
            if off.sqrt() <= JACOBI_TOL * total || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, n, p, q);
                }
            }
        }
        let mut order = [0usize, 1, 2];
        let diag = [a[0][0].re, a[1][1].re, a[2][2].re];
        order[..n].sort_by(|&x, &y| diag[y].partial_cmp(&diag[x]).unwrap_or(std::cmp::Ordering::Equal));
        let mut values = [0.0; 3];
        let mut vectors = [[ZERO; 3]; 3];
        for (k, &src) in order.iter().take(n).enumerate() {
            values[k] = diag[src];
            for row in 0..n {
                vectors[row][k] = v[row][src];
            }
        }
        Eigh { n, values, vectors }
    }
}

impl Eigh {
    /// `V diag(f(lambda)) V^H`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> SmallHerm {
        let n = self.n;
        let mut out = SmallHerm::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for k in 0..n {
                    s += self.vectors[i][k] * f(self.values[k]) * self.vectors[j][k].conj();
                }
                out.m[i][j] = s;
            }
            out.m[i][i].im = 0.0;
        }
        out
    }
}

/// Ascending eigenvalues of a 2x2 Hermitian matrix.
fn eig2(s: &SmallHerm) -> (f64, f64) {
    let a = s.m[0][0].re;
    let d = s.m[1][1].re;
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + s.m[0][1].norm_sqr()).sqrt();
    (mean - rad, mean + rad)
}

/// One complex Jacobi rotation annihilating `a[p][q]`: `a <- U^H a U`, `v <- v U`.
fn rotate(a: &mut Block, v: &mut Block, n: usize, p: usize, q: usize) {
    let apq = a[p][q];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let phase = apq / r;
    let app = a[p][p].re;
    let aqq = a[q][q].re;
    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // U = diag(1, conj(phase)) * [[c, s], [-s, c]] on the (p, q) block.
    let upp = C64::new(c, 0.0);
    let upq = C64::new(s, 0.0);
    let uqp = -phase.conj() * s;
    let uqq = phase.conj() * c;
    // a <- a U (columns p, q)
    for row in a.iter_mut().take(n) {
        let xp = row[p];
        let xq = row[q];
        row[p] = xp * upp + xq * uqp;
        row[q] = xp * upq + xq * uqq;
    }
    // a <- U^H a (rows p, q)
    for col in 0..n {
        let xp = a[p][col];
        let xq = a[q][col];
        a[p][col] = upp.conj() * xp + uqp.conj() * xq;
        a[q][col] = upq.conj() * xp + uqq.conj() * xq;
    }
    a[p][q] = ZERO;
    a[q][p] = ZERO;
    a[p][p].im = 0.0;
    a[q][q].im = 0.0;
    for row in v.iter_mut().take(n) {
        let xp = row[p];
        let xq = row[q];
        row[p] = xp * upp + xq * uqp;
        row[q] = xp * upq + xq * uqq;
    }
}
