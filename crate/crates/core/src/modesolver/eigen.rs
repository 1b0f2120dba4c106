//! Shift-invert Arnoldi for a few eigenvalues of a real sparse matrix
//! closest to a shift, with explicit restarts.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::{Mat, MatMut};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::operator::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Relative residual ‖Ax − λx‖ / (|λ|‖x‖) required for convergence.
    pub tolerance: f64,
    pub max_restarts: usize,
    /// Krylov subspace dimension; `None` picks one from the request size.
    pub krylov_dim: Option<usize>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tolerance: 1e-9, max_restarts: 25, krylov_dim: None }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// Factorized `A − σI`, reusable across solves.
pub struct ShiftInvert<'a> {
    a: &'a CsrMatrix,
    lu: Lu<usize, f64>,
    sigma: f64,
}

impl<'a> ShiftInvert<'a> {
    pub fn new(a: &'a CsrMatrix, sigma: f64) -> Result<Self> {
        let shifted = a.shifted_csc(sigma)?;
        let lu = shifted.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(ShiftInvert { a, lu, sigma })
    }

    fn apply(&self, v: &mut [f64]) {
        let n = v.len();
        let m = MatMut::from_column_major_slice_mut(v, n, 1);
        self.lu.solve_in_place(m);
    }

    /// Eigenpairs of `A` closest to σ for which `wanted(λ)` holds, ordered
    /// by distance from σ. At most `nev` are returned; an empty vector means
    /// no wanted eigenvalue lies near the shift.
    pub fn solve(&self, nev: usize, wanted: impl Fn(f64) -> bool, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
        let n = self.a.n;
        let m = opts.krylov_dim.unwrap_or((2 * nev + 24).max(40)).min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_b5a0);
        let mut start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut last_residual = f64::INFINITY;

        for _restart in 0..=opts.max_restarts {
            let (basis, h, k) = self.arnoldi(&start, m);
            let ritz = ritz_pairs(&h, k);

            let mut picked: Vec<EigenPair> = Vec::new();
            let mut any_wanted = false;
            for (theta, coeffs) in ritz {
                if picked.len() == nev {
                    break;
                }
                let lam_est = self.sigma + 1.0 / theta;
                if !wanted(lam_est) {
                    continue;
                }
                any_wanted = true;
                let mut y = vec![0.0; n];
                for (c, v) in coeffs.iter().zip(&basis) {
                    axpy(*c, v, &mut y);
                }
                normalize(&mut y);
                let (value, residual) = self.rayleigh_residual(&y);
                picked.push(EigenPair { value, vector: y, residual });
            }
            if !any_wanted {
                return Ok(Vec::new());
            }
            last_residual = picked.iter().map(|p| p.residual).fold(0.0, f64::max);
            if last_residual < opts.tolerance {
                return Ok(picked);
            }
            log::debug!("restart: worst residual {last_residual:.3e}");
            start.iter_mut().for_each(|x| *x = 0.0);
            for p in &picked {
                let w = if p.residual < opts.tolerance { 0.1 } else { 1.0 };
                axpy(w, &p.vector, &mut start);
            }
        }
        Err(Error::NoConvergence { iterations: opts.max_restarts, residual: last_residual })
    }

    /// Modified Gram–Schmidt Arnoldi with one reorthogonalization pass.
    /// Returns the basis, the Hessenberg matrix and the achieved dimension.
    fn arnoldi(&self, start: &[f64], m: usize) -> (Vec<Vec<f64>>, Mat<f64>, usize) {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut h = Mat::<f64>::zeros(m + 1, m);
        let mut v0 = start.to_vec();
        normalize(&mut v0);
        basis.push(v0);
        let mut k = m;
        for j in 0..m {
            let mut w = basis[j].clone();
            self.apply(&mut w);
            let wnorm0 = norm(&w);
            for _pass in 0..2 {
                for (i, vi) in basis.iter().enumerate() {
                    let c = dot(vi, &w);
                    h[(i, j)] += c;
                    axpy(-c, vi, &mut w);
                }
            }
            let beta = norm(&w);
            h[(j + 1, j)] = beta;
            if beta <= 1e-13 * wnorm0 {
                k = j + 1;
                break;
            }
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        }
        basis.truncate(k);
        (basis, h, k)
    }

    fn rayleigh_residual(&self, y: &[f64]) -> (f64, f64) {
        let mut ay = vec![0.0; y.len()];
        self.a.matvec(y, &mut ay);
        let yy = dot(y, y);
        let lam = dot(y, &ay) / yy;
        let r: f64 = ay.iter().zip(y).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
        (lam, r / (lam.abs() * yy.sqrt()))
    }
}

/// Real Ritz pairs of the leading `k×k` Hessenberg block, sorted by
/// decreasing |θ|. Complex pairs are skipped: the operators here are real
/// with real guided spectra, so complex Ritz values are unconverged noise.
fn ritz_pairs(h: &Mat<f64>, k: usize) -> Vec<(f64, Vec<f64>)> {
    let hk = h.as_ref().submatrix(0, 0, k, k).to_owned();
    let Ok(evd) = hk.eigen() else { return Vec::new() };
    let (s, u) = (evd.S(), evd.U());
    let mut out = Vec::new();
    for i in 0..k {
        let z = s.column_vector()[i];
        if z.im.abs() > 1e-8 * z.norm() || z.norm() == 0.0 {
            continue;
        }
        // rotate so the largest entry is real before dropping imaginary parts
        let mut big = u[(0, i)];
        for r in 1..k {
            if u[(r, i)].norm() > big.norm() {
                big = u[(r, i)];
            }
        }
        let phase = big.conj() / big.norm();
        let coeffs: Vec<f64> = (0..k).map(|r| (u[(r, i)] * phase).re).collect();
        out.push((z.re, coeffs));
    }
    out.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
