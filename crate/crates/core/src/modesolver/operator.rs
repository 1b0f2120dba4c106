//! Full-vectorial transverse-E finite-difference operator.
//!
//! Unknowns are `E_x`, `E_y` at cell centers, interleaved per cell. The
//! discretized equations are
//!
//! ```text
//! ∂x[(1/εzz) ∂x(εxx Ex)] + ∂y² Ex + k0² εxx Ex + ∂x[(1/εzz) ∂y(εyy Ey)] − ∂x∂y Ey = β² Ex
//! ∂y[(1/εzz) ∂y(εyy Ey)] + ∂x² Ey + k0² εyy Ey + ∂y[(1/εzz) ∂x(εxx Ex)] − ∂y∂x Ex = β² Ey
//! ```
//!
//! with `εzz` arithmetically averaged onto the half-cell faces. Lengths are
//! in µm, so eigenvalues are β² in µm⁻².

use faer::sparse::{SparseColMat, Triplet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::IndexMap;

/// Treatment of the window edge along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Both transverse field components vanish outside the window.
    #[default]
    ZeroField,
    /// Fields are continued with zero normal derivative; with a permittivity
    /// that is invariant along the axis this reproduces the planar limit.
    ZeroSlope,
}

/// Row-compressed real sparse matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *out = s;
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `self − shift·I` in compressed-column form for factorization.
    pub fn shifted_csc(&self, shift: f64) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz() + self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                t.push(Triplet::new(r, self.cols[k], self.vals[k]));
            }
            t.push(Triplet::new(r, r, -shift));
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| Error::Factorization(format!("{e:?}")))
    }
}

struct RowBuilder {
    entries: Vec<(usize, f64)>,
}

impl RowBuilder {
    fn add(&mut self, col: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        if let Some(e) = self.entries.iter_mut().find(|e| e.0 == col) {
            e.1 += v;
        } else {
            self.entries.push((col, v));
        }
    }
}

/// Assembles the operator for `map` at free-space wavenumber `k0` (µm⁻¹).
pub fn assemble(map: &IndexMap, k0: f64, bx: Boundary, by: Boundary) -> CsrMatrix {
    let (nx, ny) = (map.nx as isize, map.ny as isize);
    let dx = map.dx_nm * 1e-3;
    let dy = map.dy_nm * 1e-3;
    let n = 2 * map.len();
    let k02 = k0 * k0;

    // resolves a neighbor index; None means the field is zero there
    let resolve = |i: isize, j: isize| -> Option<(usize, usize)> {
        let ii = if i < 0 || i >= nx {
            match bx {
                Boundary::ZeroField => return None,
                Boundary::ZeroSlope => i.clamp(0, nx - 1),
            }
        } else {
            i
        };
        let jj = if j < 0 || j >= ny {
            match by {
                Boundary::ZeroField => return None,
                Boundary::ZeroSlope => j.clamp(0, ny - 1),
            }
        } else {
            j
        };
        Some((ii as usize, jj as usize))
    };
    let cell = |i: usize, j: usize| j * map.nx + i;
    let unk = |c: usize, i: usize, j: usize| 2 * (j * map.nx + i) + c;

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n * 11);
    let mut vals = Vec::with_capacity(n * 11);
    row_ptr.push(0);
    let mut rb = RowBuilder { entries: Vec::with_capacity(16) };

    for j in 0..ny {
        for i in 0..nx {
            let (iu, ju) = (i as usize, j as usize);
            let c = cell(iu, ju);
            for comp in 0..2usize {
                rb.entries.clear();
                // `along` is the derivative direction that sees the normal
                // component (x for Ex, y for Ey); `across` is the other one.
                let (eps_self, h_along, h_across) = if comp == 0 {
                    (&map.eps_xx, dx, dy)
                } else {
                    (&map.eps_yy, dy, dx)
                };
                let e_self = eps_self[c];
                let ezz_c = map.eps_zz[c];
                rb.add(unk(comp, iu, ju), k02 * e_self);

                for s in [-1isize, 1] {
                    // ∂along[(1/εzz) ∂along(ε Ecomp)]
                    let (ni, nj) = if comp == 0 { (i + s, j) } else { (i, j + s) };
                    match resolve(ni, nj) {
                        Some((a, b)) => {
                            let cn = cell(a, b);
                            let ezz_h = 0.5 * (ezz_c + map.eps_zz[cn]);
                            let w = 1.0 / (ezz_h * h_along * h_along);
                            rb.add(unk(comp, a, b), w * eps_self[cn]);
                            rb.add(unk(comp, iu, ju), -w * e_self);
                        }
                        None => {
                            let w = 1.0 / (ezz_c * h_along * h_along);
                            rb.add(unk(comp, iu, ju), -w * e_self);
                        }
                    }
                    // ∂across² Ecomp
                    let (ni, nj) = if comp == 0 { (i, j + s) } else { (i + s, j) };
                    let w = 1.0 / (h_across * h_across);
                    if let Some((a, b)) = resolve(ni, nj) {
                        rb.add(unk(comp, a, b), w);
                    }
                    rb.add(unk(comp, iu, ju), -w);
                }

                // cross terms: coefficient on the other component at the four
                // diagonal neighbors, a·b/(4 dx dy) · (ε_other(corner)/εzz(face) − 1)
                let other = 1 - comp;
                let eps_other = if comp == 0 { &map.eps_yy } else { &map.eps_xx };
                for a in [-1isize, 1] {
                    for b in [-1isize, 1] {
                        let Some((ci, cj)) = resolve(i + a, j + b) else { continue };
                        // face neighbor that carries 1/εzz: shifted along this row's own direction
                        let face = if comp == 0 { resolve(i + a, j) } else { resolve(i, j + b) };
                        let Some((fi, fj)) = face else { continue };
                        let ratio = eps_other[cell(ci, cj)] / map.eps_zz[cell(fi, fj)];
                        let coef = (a * b) as f64 / (4.0 * dx * dy) * (ratio - 1.0);
                        rb.add(unk(other, ci, cj), coef);
                    }
                }

                rb.entries.sort_by_key(|e| e.0);
                for &(col, v) in &rb.entries {
                    if v != 0.0 {
                        cols.push(col);
                        vals.push(v);
                    }
                }
                row_ptr.push(cols.len());
            }
        }
    }
    CsrMatrix { n, row_ptr, cols, vals }
}
