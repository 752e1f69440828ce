//! Compressed-row complex matrices and the three products the master
//! equation needs: `S·ρ`, `ρ·S` and `L·ρ·L†`.
//!
//! Chain Hamiltonians have O(N) nonzeros per row and single-site collapse
//! operators have at most one, so these kernels are O(dim²·nnz) instead
//! of the O(dim³) dense products.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::linalg::{CMatrix, ZERO};

/// Row-parallel kernels kick in at this dimension.
const PAR_DIM: usize = 64;

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    /// Set when every row holds at most one entry: `(column, value)` per
    /// row, with value zero for empty rows.
    monomial: Option<(Vec<usize>, Vec<Complex64>)>,
}

impl SparseMatrix {
    /// Keeps every entry that is not exactly zero.
    pub fn from_dense(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in m.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let monomial = row_ptr.windows(2).all(|w| w[1] - w[0] <= 1).then(|| {
            let mut perm = vec![0; dim];
            let mut coef = vec![ZERO; dim];
            for i in 0..dim {
                if row_ptr[i + 1] > row_ptr[i] {
                    perm[i] = cols[row_ptr[i]];
                    coef[i] = vals[row_ptr[i]];
                }
            }
            (perm, coef)
        });
        SparseMatrix {
            dim,
            row_ptr,
            cols,
            vals,
            monomial,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> CMatrix {
        let mut out = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut dense = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                dense[[j, i]] = v.conj();
            }
        }
        SparseMatrix::from_dense(&dense)
    }

    /// `out[i, :] += scale · Σ_k S[i,k] ρ[k, :]`, written into one output row.
    #[inline]
    fn left_row(&self, i: usize, rho: &[Complex64], scale: Complex64, out_row: &mut [Complex64]) {
        let n = self.dim;
        for (k, v) in self.row(i) {
            let coef = scale * v;
            let src = &rho[k * n..(k + 1) * n];
            for (o, &r) in out_row.iter_mut().zip(src) {
                *o += coef * r;
            }
        }
    }

    /// `out[i, :] += scale · Σ_k ρ[i,k] S[k, :]`
    #[inline]
    fn right_row(&self, rho_row: &[Complex64], scale: Complex64, out_row: &mut [Complex64]) {
        for (k, &r) in rho_row.iter().enumerate() {
            if r == ZERO {
                continue;
            }
            let coef = scale * r;
            for (j, v) in self.row(k) {
                out_row[j] += coef * v;
            }
        }
    }

    /// `out[i, :] += scale · (L ρ L†)[i, :]`
    #[inline]
    fn sandwich_row(&self, i: usize, rho: &[Complex64], scale: Complex64, out_row: &mut [Complex64]) {
        let n = self.dim;
        if let Some((perm, coef)) = &self.monomial {
            if coef[i] == ZERO {
                return;
            }
            let c = scale * coef[i];
            let src = &rho[perm[i] * n..(perm[i] + 1) * n];
            for ((o, &p), &v) in out_row.iter_mut().zip(perm).zip(coef) {
                if v != ZERO {
                    *o += c * v.conj() * src[p];
                }
            }
            return;
        }
        for (k, v) in self.row(i) {
            let coef = scale * v;
            let src = &rho[k * n..(k + 1) * n];
            for (b, o) in out_row.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (l, w) in self.row(b) {
                    acc += src[l] * w.conj();
                }
                *o += coef * acc;
            }
        }
    }

    /// `out += scale · S·ρ`
    pub fn left_mul_acc(&self, rho: &CMatrix, scale: Complex64, out: &mut CMatrix) {
        let rho = rho.as_slice().expect("standard layout");
        let n = self.dim;
        for_each_row(out, n, |i, row| self.left_row(i, rho, scale, row));
    }

    /// `out += scale · ρ·S`
    pub fn right_mul_acc(&self, rho: &CMatrix, scale: Complex64, out: &mut CMatrix) {
        let rho = rho.as_slice().expect("standard layout");
        let n = self.dim;
        for_each_row(out, n, |i, row| self.right_row(&rho[i * n..(i + 1) * n], scale, row));
    }

    /// `out += scale · L·ρ·L†`
    pub fn sandwich_acc(&self, rho: &CMatrix, scale: Complex64, out: &mut CMatrix) {
        let rho = rho.as_slice().expect("standard layout");
        let n = self.dim;
        for_each_row(out, n, |i, row| self.sandwich_row(i, rho, scale, row));
    }
}

fn for_each_row<F>(out: &mut CMatrix, n: usize, f: F)
where
    F: Fn(usize, &mut [Complex64]) + Sync,
{
    let data = out.as_slice_mut().expect("standard layout");
    if n >= PAR_DIM {
        data.par_chunks_mut(n).enumerate().for_each(|(i, row)| f(i, row));
    } else {
        data.chunks_mut(n).enumerate().for_each(|(i, row)| f(i, row));
    }
}

/// A generator split into the non-Hermitian effective Hamiltonian and the
/// jump part: `𝓛ρ = −i(H_eff ρ − ρ H_eff†) + Σ_k Γ_k L_k ρ L_k†` with
/// `H_eff = H − (i/2) Σ_k Γ_k L_k† L_k`.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    dim: usize,
    h_eff: SparseMatrix,
    h_eff_adj: SparseMatrix,
    jumps: Vec<(f64, SparseMatrix)>,
    /// Diagonal jumps folded into one elementwise weight:
    /// `W[i,j] = Σ_k Γ_k L_k[i,i] conj(L_k[j,j])`.
    diag_weight: Option<Vec<Complex64>>,
}

/// Largest dimension for which diagonal jumps are folded into a dense weight.
const DIAG_FOLD_MAX_DIM: usize = 512;

impl SparseGenerator {
    pub fn new(h_eff: &CMatrix, jumps: Vec<(f64, SparseMatrix)>) -> Self {
        let h_eff = SparseMatrix::from_dense(h_eff);
        let dim = h_eff.dim();
        let is_diagonal = |l: &SparseMatrix| {
            l.monomial.as_ref().is_some_and(|(perm, coef)| {
                perm.iter()
                    .zip(coef)
                    .enumerate()
                    .all(|(i, (&p, &v))| v == ZERO || p == i)
            })
        };
        let (diagonal, jumps): (Vec<_>, Vec<_>) = if dim <= DIAG_FOLD_MAX_DIM {
            jumps.into_iter().partition(|(_, l)| is_diagonal(l))
        } else {
            (Vec::new(), jumps)
        };
        let diag_weight = (!diagonal.is_empty()).then(|| {
            let mut w = vec![ZERO; dim * dim];
            for (rate, l) in &diagonal {
                let (_, coef) = l.monomial.as_ref().expect("diagonal jumps are monomial");
                for (i, &a) in coef.iter().enumerate() {
                    for (j, &b) in coef.iter().enumerate() {
                        w[i * dim + j] += a * b.conj() * *rate;
                    }
                }
            }
            w
        });
        SparseGenerator {
            dim,
            h_eff_adj: h_eff.adjoint(),
            h_eff,
            jumps,
            diag_weight,
        }
    }

    /// `out += Σ_k Γ_k L_k ρ L_k†`
    fn jump_acc(&self, rho: &CMatrix, out: &mut CMatrix) {
        for (rate, l) in &self.jumps {
            l.sandwich_acc(rho, Complex64::new(*rate, 0.0), out);
        }
        if let Some(w) = &self.diag_weight {
            let r = rho.as_slice().expect("standard layout");
            let n = self.dim;
            for_each_row(out, n, |i, row| {
                let span = i * n..(i + 1) * n;
                for ((o, &x), &wij) in row.iter_mut().zip(&r[span.clone()]).zip(&w[span]) {
                    *o += wij * x;
                }
            });
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// General right-hand side; no assumption on `rho`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = Array2::zeros((self.dim, self.dim));
        let minus_i = Complex64::new(0.0, -1.0);
        self.h_eff.left_mul_acc(rho, minus_i, &mut out);
        self.h_eff_adj.right_mul_acc(rho, -minus_i, &mut out);
        self.jump_acc(rho, &mut out);
        out
    }

    /// Right-hand side for Hermitian `rho`, written into `out`.
    ///
    /// Uses `ρ H_eff† = (H_eff ρ)†`, so only one Hamiltonian product is
    /// formed and the result is Hermitian by construction. `scratch` must
    /// have the same shape as `rho`.
    pub fn apply_hermitian_into(&self, rho: &CMatrix, scratch: &mut CMatrix, out: &mut CMatrix) {
        let n = self.dim;
        let minus_i = Complex64::new(0.0, -1.0);
        scratch.fill(ZERO);
        out.fill(ZERO);
        self.h_eff.left_mul_acc(rho, minus_i, scratch);
        self.jump_acc(rho, out);
        let x = scratch.as_slice().expect("standard layout");
        for_each_row(out, n, |i, row| {
            for (j, o) in row.iter_mut().enumerate() {
                *o += x[i * n + j] + x[j * n + i].conj();
            }
        });
    }
}
