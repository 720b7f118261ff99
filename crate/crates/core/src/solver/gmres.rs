//! Restarted GMRES with modified Gram-Schmidt and Givens rotations.
//!
//! Inner products are summed sequentially so results do not depend on the
//! thread count.

use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    /// True relative residual `|b - A x| / |b|` at exit.
    pub rel_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(y, x)| *y += s * x);
}

/// Solves `A x = b` to relative residual `tol`, starting from zero.
pub fn gmres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> GmresOutcome {
    let len = b.len();
    let mut x = vec![0.0; len];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return GmresOutcome {
            x,
            rel_residual: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let restart = restart.max(1);
    let mut total = 0;
    let mut first = true;
    loop {
        let r: Vec<f64> = if first {
            b.to_vec()
        } else {
            let ax = apply(&x);
            b.iter().zip(&ax).map(|(b, a)| b - a).collect()
        };
        first = false;
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= tol || total >= max_iter || !rel.is_finite() {
            return GmresOutcome {
                x,
                rel_residual: rel,
                iterations: total,
                converged: rel <= tol,
            };
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut cols = 0;
        for j in 0..restart {
            if total >= max_iter {
                break;
            }
            let mut w = apply(&basis[j]);
            total += 1;
            // two MGS passes
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    h[i][j] += c;
                    axpy(&mut w, -c, v);
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            if d == 0.0 {
                break;
            }
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            cols = j + 1;
            if g[j + 1].abs() / bnorm <= tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; cols];
        for i in (0..cols).rev() {
            let s: f64 = (i + 1..cols).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(&mut x, *yi, v);
        }
        if cols == 0 {
            let ax = apply(&x);
            let rel = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
            return GmresOutcome {
                x,
                rel_residual: rel,
                iterations: total,
                converged: rel <= tol,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter().map(|row| dot(row, x)).collect()
    }

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 30;
        let m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            4.0 + i as f64 * 0.1
                        } else {
                            ((i * 7 + j * 3) % 5) as f64 * 0.05 - 0.1 * (j > i) as u8 as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let want: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = matvec(&m, &want);
        let out = gmres(|x| matvec(&m, x), &b, 1e-13, 200, 7);
        assert!(out.converged);
        let err = out.x.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err:e}");
    }

    #[test]
    fn zero_rhs_and_cap() {
        let out = gmres(|x| x.to_vec(), &[0.0; 4], 1e-12, 10, 5);
        assert!(out.converged && out.iterations == 0);
        // rotation-like operator stalls on a short restart
        let rot = |x: &[f64]| {
            let n = x.len();
            (0..n).map(|i| x[(i + 1) % n]).collect::<Vec<_>>()
        };
        let mut b = vec![0.0; 8];
        b[0] = 1.0;
        let out = gmres(rot, &b, 1e-12, 6, 3);
        assert!(!out.converged);
        assert!(out.rel_residual > 1e-12 && out.iterations == 6);
    }
}
