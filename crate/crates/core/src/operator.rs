//! Perturbed metric `gt_{i jbar} = g_{i jbar} + a_i u_jbar + conj(a_j) u_i + u_{i jbar}`,
//! the log-determinant residual, and its linearization
//! `L v = gt^{i jbar} (v_{i jbar} + a_i v_jbar + conj(a_j) v_i)` with adjoint.
//!
//! The matrix inverse `Gi` of `gt` enters contractions as `gt^{i jbar} = Gi[j][i]`,
//! so that `gt^{i jbar} M_{i jbar} = tr(Gi M)`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::torus::calculus::{anti, apply_symbol, hessian_entries, spectrum};
use crate::torus::{
    pair_index, ComplexScalarField, FieldError, HermitianMatrixField, OneFormField, PeriodicGrid,
};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("reference metric is not positive definite (min eigenvalue {min_eig:e})")]
    MetricNotPositive { min_eig: f64 },
    #[error("perturbed metric is not positive definite (min eigenvalue {min_eig:e})")]
    Degenerate { min_eig: f64 },
}

/// The data `(g, a, F)` of the equation on a fixed grid.
#[derive(Clone, Debug)]
pub struct ProblemData {
    grid: PeriodicGrid,
    g: HermitianMatrixField,
    a: OneFormField,
    f: ComplexScalarField,
    log_det_g: Vec<f64>,
    g_min_eig: f64,
}

impl ProblemData {
    pub fn new(
        g: HermitianMatrixField,
        a: OneFormField,
        f: ComplexScalarField,
    ) -> Result<Self, OperatorError> {
        let grid = g.grid().clone();
        if a.grid() != &grid || f.grid() != &grid {
            return Err(FieldError::GridMismatch.into());
        }
        f.require_real()?;
        let analyses: Vec<_> = (0..grid.len())
            .into_par_iter()
            .map(|p| g.at(p).analyze())
            .collect();
        let g_min_eig = analyses.iter().map(|a| a.min_eig).fold(f64::INFINITY, f64::min);
        if !(g_min_eig > 0.0) {
            return Err(OperatorError::MetricNotPositive { min_eig: g_min_eig });
        }
        let log_det_g = analyses
            .iter()
            .map(|a| a.log_det.expect("positive definite"))
            .collect();
        Ok(Self {
            grid,
            g,
            a,
            f,
            log_det_g,
            g_min_eig,
        })
    }

    /// Identity reference metric.
    pub fn flat(a: OneFormField, f: ComplexScalarField) -> Result<Self, OperatorError> {
        let g = HermitianMatrixField::identity(a.grid());
        Self::new(g, a, f)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn g(&self) -> &HermitianMatrixField {
        &self.g
    }

    pub fn a(&self) -> &OneFormField {
        &self.a
    }

    pub fn f(&self) -> &ComplexScalarField {
        &self.f
    }

    pub fn log_det_g(&self) -> &[f64] {
        &self.log_det_g
    }

    pub fn g_min_eig(&self) -> f64 {
        self.g_min_eig
    }

    /// Same metric and form with a different source.
    pub fn with_source(&self, f: ComplexScalarField) -> Result<Self, OperatorError> {
        if f.grid() != &self.grid {
            return Err(FieldError::GridMismatch.into());
        }
        f.require_real()?;
        Ok(Self { f, ..self.clone() })
    }
}

/// Assembled `gt` at a state `u`.
#[derive(Clone, Debug)]
pub struct OperatorOutput {
    pub gtilde: HermitianMatrixField,
    /// `log det gt - log det g`; present only when `min_eig > 0`.
    pub log_det_ratio: Option<ComplexScalarField>,
    /// Pointwise matrix inverse of `gt`; present only when `min_eig > 0`.
    pub gtilde_inverse: Option<HermitianMatrixField>,
    /// Smallest eigenvalue of `gt` over all points.
    pub min_eig: f64,
}

impl OperatorOutput {
    pub fn is_admissible(&self) -> bool {
        self.min_eig > 0.0
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.gtilde.grid()
    }

    fn require_admissible(&self) -> Result<(&ComplexScalarField, &HermitianMatrixField), OperatorError> {
        match (&self.log_det_ratio, &self.gtilde_inverse) {
            (Some(l), Some(i)) if self.min_eig > 0.0 => Ok((l, i)),
            _ => Err(OperatorError::Degenerate { min_eig: self.min_eig }),
        }
    }
}

/// First derivatives `d_k u` of a real field from its spectrum.
pub(crate) fn gradient_from_spectrum(grid: &PeriodicGrid, hat: &[C64]) -> Vec<Vec<C64>> {
    grid.symbols()
        .holo
        .iter()
        .map(|s| apply_symbol(grid, hat, s))
        .collect()
}

/// The gradient term plus Hessian, `a_i u_jbar + conj(a_j) u_i + u_{i jbar}`, as a matrix field.
pub fn gradient_term(a: &OneFormField, u: &ComplexScalarField) -> Result<HermitianMatrixField, OperatorError> {
    u.require_real()?;
    let grid = u.grid();
    if a.grid() != grid {
        return Err(FieldError::GridMismatch.into());
    }
    let n = grid.n();
    let hat = spectrum(u);
    let grad = gradient_from_spectrum(grid, &hat);
    let hess = hessian_entries(grid, &hat);
    let mut data = vec![C64::new(0.0, 0.0); grid.len() * n * n];
    data.par_chunks_mut(n * n).enumerate().for_each(|(p, block)| {
        for i in 0..n {
            for j in i..n {
                // u_jbar = conj(u_j) for real u
                let mut v = a.at(i, p) * grad[j][p].conj()
                    + a.at(j, p).conj() * grad[i][p]
                    + hess[pair_index(n, i, j)][p];
                if i == j {
                    v.im = 0.0;
                }
                block[i * n + j] = v;
                block[j * n + i] = v.conj();
            }
        }
    });
    Ok(HermitianMatrixField::from_data_unchecked(grid, data))
}

pub fn assemble_gtilde(p: &ProblemData, u: &ComplexScalarField) -> Result<OperatorOutput, OperatorError> {
    if u.grid() != p.grid() {
        return Err(FieldError::GridMismatch.into());
    }
    let grid = p.grid();
    let n = grid.n();
    let term = gradient_term(p.a(), u)?;
    let mut data = term.data().to_vec();
    data.par_iter_mut()
        .zip(p.g().data().par_iter())
        .for_each(|(d, g)| *d += g);
    let gtilde = HermitianMatrixField::from_data_unchecked(grid, data);
    let analyses: Vec<_> = (0..grid.len())
        .into_par_iter()
        .map(|q| gtilde.at(q).analyze())
        .collect();
    let min_eig = analyses.iter().map(|a| a.min_eig).fold(f64::INFINITY, f64::min);
    if !(min_eig > 0.0) {
        return Ok(OperatorOutput {
            gtilde,
            log_det_ratio: None,
            gtilde_inverse: None,
            min_eig,
        });
    }
    let ratio: Vec<f64> = analyses
        .iter()
        .zip(p.log_det_g())
        .map(|(a, lg)| a.log_det.expect("positive definite") - lg)
        .collect();
    let mut inv = Vec::with_capacity(grid.len() * n * n);
    for a in &analyses {
        let m = a.inverse.expect("positive definite");
        for i in 0..n {
            for j in 0..n {
                inv.push(m.get(i, j));
            }
        }
    }
    Ok(OperatorOutput {
        gtilde,
        log_det_ratio: Some(ComplexScalarField::from_real_unchecked(grid, ratio)),
        gtilde_inverse: Some(HermitianMatrixField::from_data_unchecked(grid, inv)),
        min_eig,
    })
}

/// `log det gt - log det g - t F - b` from an assembled state.
pub fn residual_from(
    op: &OperatorOutput,
    p: &ProblemData,
    b: f64,
    t: f64,
) -> Result<ComplexScalarField, OperatorError> {
    let (ratio, _) = op.require_admissible()?;
    let vals = ratio
        .values()
        .iter()
        .zip(p.f().values())
        .map(|(r, f)| r.re - t * f.re - b)
        .collect();
    Ok(ComplexScalarField::from_real_unchecked(p.grid(), vals))
}

pub fn ma_residual(
    p: &ProblemData,
    u: &ComplexScalarField,
    b: f64,
    t: f64,
) -> Result<ComplexScalarField, OperatorError> {
    let op = assemble_gtilde(p, u)?;
    residual_from(&op, p, b, t)
}

/// Pointwise coefficients of `L` and its constant-coefficient preconditioner.
///
/// For real `v`,
/// `L v = Re[ sum_i C_ii v_{i ibar} + 2 sum_{i<j} C_ij v_{i jbar} + 2 sum_i B_i v_i ]`
/// with `C_ij = Gi[j][i]` and `B_i = sum_j C_ij conj(a_j)`.
pub struct Linearization {
    grid: PeriodicGrid,
    pairs: Vec<(usize, usize)>,
    /// `C_ij` for every `(i, j)` in `pairs` (`i <= j`).
    coeff: Vec<Vec<C64>>,
    /// `B_i`.
    first_order: Vec<Vec<C64>>,
    /// Multiplier of the mean-coefficient operator.
    precond: Vec<C64>,
    /// Multiplier of its transpose.
    precond_t: Vec<C64>,
}

impl Linearization {
    pub fn new(op: &OperatorOutput, a: &OneFormField) -> Result<Self, OperatorError> {
        let (_, inv) = op.require_admissible()?;
        let grid = op.grid().clone();
        if a.grid() != &grid {
            return Err(FieldError::GridMismatch.into());
        }
        let n = grid.n();
        let len = grid.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let coeff: Vec<Vec<C64>> = pairs
            .iter()
            .map(|&(i, j)| (0..len).map(|p| inv.entry(p, j, i)).collect())
            .collect();
        let first_order: Vec<Vec<C64>> = (0..n)
            .map(|i| {
                (0..len)
                    .map(|p| (0..n).map(|j| inv.entry(p, j, i) * a.at(j, p).conj()).sum())
                    .collect()
            })
            .collect();

        let mean = |v: &[C64]| v.iter().sum::<C64>() / len as f64;
        let mut cbar = [[C64::new(0.0, 0.0); 3]; 3];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let m = mean(&coeff[k]);
            cbar[i][j] = m;
            cbar[j][i] = m.conj();
        }
        let bbar: Vec<C64> = first_order.iter().map(|b| mean(b)).collect();
        let sym = grid.symbols();
        let mut precond = vec![C64::new(0.0, 0.0); len];
        let mut precond_t = vec![C64::new(0.0, 0.0); len];
        for q in 0..len {
            let mut second = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let h = if i <= j {
                        sym.hess[pair_index(n, i, j)][q]
                    } else {
                        // d_i dbar_j = conj-reflection of d_j dbar_i
                        sym.holo[i][q] * anti(sym.holo[j][q])
                    };
                    second += cbar[i][j] * h;
                }
            }
            let mut first = C64::new(0.0, 0.0);
            for i in 0..n {
                let s = sym.holo[i][q];
                first += bbar[i] * s + bbar[i].conj() * anti(s);
            }
            precond[q] = second + first;
            precond_t[q] = second - first;
        }
        Ok(Self {
            grid,
            pairs,
            coeff,
            first_order,
            precond,
            precond_t,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// `L v` from the spectrum of a real `v`.
    pub fn apply_spectrum(&self, hat: &[C64]) -> Vec<f64> {
        let grid = &self.grid;
        let n = grid.n();
        let sym = grid.symbols();
        let mut acc = vec![C64::new(0.0, 0.0); grid.len()];
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let e = apply_symbol(grid, hat, &sym.hess[pair_index(n, i, j)]);
            let w = if i == j { 1.0 } else { 2.0 };
            acc.par_iter_mut()
                .zip(e.par_iter().zip(self.coeff[k].par_iter()))
                .for_each(|(o, (e, c))| *o += c * e * w);
        }
        for i in 0..n {
            let e = apply_symbol(grid, hat, &sym.holo[i]);
            acc.par_iter_mut()
                .zip(e.par_iter().zip(self.first_order[i].par_iter()))
                .for_each(|(o, (e, b))| *o += b * e * 2.0);
        }
        acc.into_iter().map(|v| v.re).collect()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut hat: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.grid.fft_forward(&mut hat);
        self.apply_spectrum(&hat)
    }

    /// `L* w` with respect to `<f, h> = mean(f h)`.
    pub fn apply_adjoint(&self, w: &[f64]) -> Vec<f64> {
        let grid = &self.grid;
        let n = grid.n();
        let sym = grid.symbols();
        let mut acc = vec![C64::new(0.0, 0.0); grid.len()];
        let mut accumulate = |coeff: &[C64], symbol: &(dyn Fn(usize) -> C64 + Sync)| {
            let mut prod: Vec<C64> = coeff.par_iter().zip(w.par_iter()).map(|(c, &x)| c * x).collect();
            grid.fft_forward(&mut prod);
            acc.par_iter_mut()
                .enumerate()
                .zip(prod.par_iter())
                .for_each(|((q, o), p)| *o += symbol(q) * p);
        };
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let weight = if i == j { 1.0 } else { 2.0 };
            let h = &sym.hess[pair_index(n, i, j)];
            accumulate(&self.coeff[k], &|q| h[q] * weight);
        }
        for i in 0..n {
            let s = &sym.holo[i];
            accumulate(&self.first_order[i], &|q| s[q] * -2.0);
        }
        grid.fft_inverse(&mut acc);
        acc.into_iter().map(|v| v.re).collect()
    }

    /// Multiplier of the mean-coefficient approximation of `L`; zero at the
    /// constant mode.
    pub fn preconditioner_symbol(&self) -> &[C64] {
        &self.precond
    }

    /// Multiplier of the transposed approximation, used for `L*`.
    pub fn preconditioner_symbol_transpose(&self) -> &[C64] {
        &self.precond_t
    }
}

pub fn linearized_apply(
    op: &OperatorOutput,
    a: &OneFormField,
    v: &ComplexScalarField,
) -> Result<ComplexScalarField, OperatorError> {
    v.require_real()?;
    let lin = Linearization::new(op, a)?;
    Ok(ComplexScalarField::from_real_unchecked(op.grid(), lin.apply(&v.re())))
}

pub fn linearized_adjoint_apply(
    op: &OperatorOutput,
    a: &OneFormField,
    w: &ComplexScalarField,
) -> Result<ComplexScalarField, OperatorError> {
    w.require_real()?;
    let lin = Linearization::new(op, a)?;
    Ok(ComplexScalarField::from_real_unchecked(op.grid(), lin.apply_adjoint(&w.re())))
}

/// `tr_gt g = gt^{i jbar} g_{i jbar}` pointwise.
pub fn trace_of_metric(op: &OperatorOutput, p: &ProblemData) -> Result<Vec<f64>, OperatorError> {
    let (_, inv) = op.require_admissible()?;
    Ok((0..p.grid().len())
        .map(|q| inv.at(q).trace_product(&p.g().at(q)))
        .collect())
}

/// Smallest eigenvalue over a matrix field.
pub fn min_eigenvalue(field: &HermitianMatrixField) -> f64 {
    (0..field.grid().len())
        .into_par_iter()
        .map(|q| field.at(q).min_eigenvalue())
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::torus::{sample_field, TrigExpression, TrigTerm};

    fn random_trig(rng: &mut ChaCha8Rng, grid: &PeriodicGrid, terms: usize, amp: f64) -> ComplexScalarField {
        let kmax = (grid.res().iter().min().unwrap() / 2 - 1).min(2) as i64;
        let terms = (0..terms)
            .map(|_| {
                let k = (0..grid.axes()).map(|_| rng.random_range(-kmax..=kmax)).collect();
                let a = rng.random_range(-amp..amp);
                if rng.random_bool(0.5) {
                    TrigTerm::cos(a, k)
                } else {
                    TrigTerm::sin(a, k)
                }
            })
            .collect();
        sample_field(&TrigExpression::new(terms), grid).unwrap()
    }

    fn random_constant_form(rng: &mut ChaCha8Rng, grid: &PeriodicGrid, scale: f64) -> OneFormField {
        let c: Vec<C64> = (0..grid.n())
            .map(|_| C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
            .collect();
        OneFormField::constant(grid, &c).unwrap()
    }

    fn cos_x1(grid: &PeriodicGrid, amp: f64) -> ComplexScalarField {
        let mut k = vec![0; grid.axes()];
        k[0] = 1;
        sample_field(&TrigExpression::new(vec![TrigTerm::cos(amp, k)]), grid).unwrap()
    }

    fn dot(f: &[f64], h: &[f64]) -> f64 {
        f.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / f.len() as f64
    }

    #[test]
    fn zero_potential_gives_reference_metric() {
        let g = PeriodicGrid::uniform(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_constant_form(&mut rng, &g, 0.5);
        let p = ProblemData::flat(a, ComplexScalarField::zeros(&g)).unwrap();
        let op = assemble_gtilde(&p, &ComplexScalarField::zeros(&g)).unwrap();
        assert!(op.gtilde.sup_distance(p.g()).unwrap() < 1e-15);
        assert!((op.min_eig - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_dimensional_cosine() {
        let g = PeriodicGrid::uniform(1, 16).unwrap();
        let eps = 0.05;
        let p = ProblemData::flat(OneFormField::zero(&g), ComplexScalarField::zeros(&g)).unwrap();
        let op = assemble_gtilde(&p, &cos_x1(&g, eps)).unwrap();
        for q in 0..g.len() {
            let x = g.coords(q)[0];
            let want = 1.0 - eps * PI * PI * (2.0 * PI * x).cos();
            assert!((op.gtilde.entry(q, 0, 0).re - want).abs() < 1e-13);
        }
        assert!((op.min_eig - (1.0 - eps * PI * PI)).abs() < 1e-13);
        let bad = assemble_gtilde(&p, &cos_x1(&g, 1.05 / (PI * PI))).unwrap();
        assert!(!bad.is_admissible());
        assert!(bad.log_det_ratio.is_none());
    }

    #[test]
    fn constant_form_with_sine_matches_symbolic() {
        // u = e sin(2 pi x): u_z = pi e cos, u_{z zbar} = -pi^2 e sin
        let g = PeriodicGrid::uniform(1, 16).unwrap();
        let (c, eps) = (0.4, 0.02);
        let a = OneFormField::constant(&g, &[C64::new(c, 0.0)]).unwrap();
        let p = ProblemData::flat(a, ComplexScalarField::zeros(&g)).unwrap();
        let u = sample_field(&TrigExpression::new(vec![TrigTerm::sin(eps, vec![1, 0])]), &g).unwrap();
        let op = assemble_gtilde(&p, &u).unwrap();
        for q in 0..g.len() {
            let th = 2.0 * PI * g.coords(q)[0];
            let want = 1.0 + 2.0 * c * eps * PI * th.cos() - eps * PI * PI * th.sin();
            assert!((op.gtilde.entry(q, 0, 0) - C64::new(want, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn residual_examples() {
        let g = PeriodicGrid::uniform(2, 8).unwrap();
        let f = ComplexScalarField::constant(&g, 0.7);
        let p = ProblemData::flat(OneFormField::zero(&g), f).unwrap();
        let zero = ComplexScalarField::zeros(&g);
        let r = ma_residual(&p, &zero, 0.0, 0.4).unwrap();
        assert!(r.values().iter().all(|v| (v.re + 0.28).abs() < 1e-15));
        let r = ma_residual(&p, &zero, -0.7, 1.0).unwrap();
        assert!(r.max_abs() < 1e-15);
    }

    #[test]
    fn manufactured_residual_vanishes() {
        let g = PeriodicGrid::uniform(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_constant_form(&mut rng, &g, 0.3);
        let u = random_trig(&mut rng, &g, 4, 0.01);
        let p0 = ProblemData::flat(a, ComplexScalarField::zeros(&g)).unwrap();
        let op = assemble_gtilde(&p0, &u).unwrap();
        let p = p0.with_source(op.log_det_ratio.clone().unwrap()).unwrap();
        assert!(ma_residual(&p, &u, 0.0, 1.0).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn degenerate_state_is_rejected() {
        let g = PeriodicGrid::uniform(1, 8).unwrap();
        let p = ProblemData::flat(OneFormField::zero(&g), ComplexScalarField::zeros(&g)).unwrap();
        let u = cos_x1(&g, 0.2);
        assert!(matches!(
            ma_residual(&p, &u, 0.0, 1.0),
            Err(OperatorError::Degenerate { .. })
        ));
        let op = assemble_gtilde(&p, &u).unwrap();
        assert!(linearized_apply(&op, p.a(), &u).is_err());
    }

    #[test]
    fn constant_direction_is_annihilated() {
        let g = PeriodicGrid::uniform(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_constant_form(&mut rng, &g, 0.4);
        let p = ProblemData::flat(a, ComplexScalarField::zeros(&g)).unwrap();
        let u = random_trig(&mut rng, &g, 3, 0.002);
        let op = assemble_gtilde(&p, &u).unwrap();
        let lv = linearized_apply(&op, p.a(), &ComplexScalarField::constant(&g, 2.5)).unwrap();
        assert!(lv.max_abs() < 1e-13);
    }

    #[test]
    fn flat_linearization_is_laplacian() {
        let g = PeriodicGrid::uniform(1, 16).unwrap();
        let p = ProblemData::flat(OneFormField::zero(&g), ComplexScalarField::zeros(&g)).unwrap();
        let op = assemble_gtilde(&p, &ComplexScalarField::zeros(&g)).unwrap();
        let v = cos_x1(&g, 1.0);
        let lv = linearized_apply(&op, p.a(), &v).unwrap();
        let lsv = linearized_adjoint_apply(&op, p.a(), &v).unwrap();
        for q in 0..g.len() {
            let want = -PI * PI * v.values()[q].re;
            assert!((lv.values()[q].re - want).abs() < 1e-12);
            assert!((lsv.values()[q].re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let g = PeriodicGrid::uniform(n, 8).unwrap();
            let a = random_constant_form(&mut rng, &g, 0.3);
            let p = ProblemData::flat(a, ComplexScalarField::zeros(&g)).unwrap();
            let u = random_trig(&mut rng, &g, 3, 0.002);
            let op = assemble_gtilde(&p, &u).unwrap();
            let lu = linearized_apply(&op, p.a(), &u).unwrap();
            let tr = trace_of_metric(&op, &p).unwrap();
            let err = lu
                .values()
                .iter()
                .zip(&tr)
                .map(|(l, t)| (l.re - (n as f64 - t)).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-9, "n={n} err={err:e}");
        }
    }

    #[test]
    fn centered_gateaux_derivative_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = PeriodicGrid::uniform(2, 8).unwrap();
        let a = random_constant_form(&mut rng, &g, 0.3);
        let p = ProblemData::flat(a, ComplexScalarField::zeros(&g)).unwrap();
        let u = random_trig(&mut rng, &g, 3, 0.002);
        let v = random_trig(&mut rng, &g, 3, 0.002);
        let op = assemble_gtilde(&p, &u).unwrap();
        let lv = linearized_apply(&op, p.a(), &v).unwrap();
        let err = |s: f64| {
            let plus = assemble_gtilde(&p, &u.axpy(s, &v).unwrap()).unwrap();
            let minus = assemble_gtilde(&p, &u.axpy(-s, &v).unwrap()).unwrap();
            let (lp, lm) = (plus.log_det_ratio.unwrap(), minus.log_det_ratio.unwrap());
            (0..g.len())
                .map(|q| ((lp.values()[q].re - lm.values()[q].re) / (2.0 * s) - lv.values()[q].re).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.4), err(0.2));
        assert!(e1 / e2 >= 3.5, "{e1:e} {e2:e}");
    }

    #[test]
    fn adjoint_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=3 {
            let g = PeriodicGrid::uniform(n, 8).unwrap();
            let a = random_constant_form(&mut rng, &g, 0.3);
            let p = ProblemData::flat(a, ComplexScalarField::zeros(&g)).unwrap();
            let u = random_trig(&mut rng, &g, 3, 0.002);
            let op = assemble_gtilde(&p, &u).unwrap();
            let lin = Linearization::new(&op, p.a()).unwrap();
            let v = random_trig(&mut rng, &g, 4, 1.0).re();
            let w = random_trig(&mut rng, &g, 4, 1.0).re();
            let lhs = dot(&lin.apply(&v), &w);
            let rhs = dot(&v, &lin.apply_adjoint(&w));
            let scale = dot(&v, &v).sqrt() * dot(&w, &w).sqrt();
            assert!((lhs - rhs).abs() <= 1e-10 * scale, "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn adjoint_of_constant_matches_direct_assembly() {
        // a = 0: L* 1 = sum_{ij} d_jbar d_i gt^{i jbar}
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = PeriodicGrid::uniform(2, 8).unwrap();
        let p = ProblemData::flat(OneFormField::zero(&g), ComplexScalarField::zeros(&g)).unwrap();
        let u = random_trig(&mut rng, &g, 3, 0.002);
        let op = assemble_gtilde(&p, &u).unwrap();
        let inv = op.gtilde_inverse.as_ref().unwrap();
        let ones = ComplexScalarField::constant(&g, 1.0);
        let got = linearized_adjoint_apply(&op, p.a(), &ones).unwrap();
        let sym = g.symbols();
        let mut want = vec![C64::new(0.0, 0.0); g.len()];
        for i in 0..2 {
            for j in 0..2 {
                let hat = spectrum(&inv.entry_field(j, i));
                let s: Vec<C64> = if i == j {
                    sym.hess[pair_index(2, i, i)].clone()
                } else {
                    (0..g.len()).map(|q| sym.holo[i][q] * anti(sym.holo[j][q])).collect()
                };
                for (w, d) in want.iter_mut().zip(apply_symbol(&g, &hat, &s)) {
                    *w += d;
                }
            }
        }
        for (gv, wv) in got.values().iter().zip(&want) {
            assert!((gv.re - wv.re).abs() < 1e-10);
        }
    }
}
