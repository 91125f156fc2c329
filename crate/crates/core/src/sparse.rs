//! Compressed sparse row operators and a Jacobi-preconditioned conjugate
//! gradient solver.
//!
//! Every system solved in this crate is symmetric positive definite after
//! periodic reduction or pinning, so CG is the only solver provided.

use std::io::Write;
use std::ops::Range;

use crate::error::{Error, Result};

/// Entries with magnitude at or below this are dropped during assembly.
const ZERO_CUTOFF: f64 = 1e-300;

/// Accumulates `(row, col, value)` contributions; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Self {
        Self {
            dim,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseOperator {
        self.entries
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut iter = self.entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v.abs() > ZERO_CUTOFF {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for i in 0..self.dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator {
            dim: self.dim,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Square sparse matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn column_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates over `(col, value)` pairs of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.bilinear_form(x, x)
    }

    /// `xᵀ A y`
    pub fn bilinear_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        dot(x, &ay)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `alpha * self + beta * other`, on the union of both sparsity patterns.
    pub fn linear_combination(&self, alpha: f64, other: &SparseOperator, beta: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut row_ptr = Vec::with_capacity(self.dim + 1);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        row_ptr.push(0);
        for i in 0..self.dim {
            let (mut p, pe) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let (mut q, qe) = (other.row_ptr[i], other.row_ptr[i + 1]);
            while p < pe || q < qe {
                let cp = if p < pe { self.col_idx[p] } else { usize::MAX };
                let cq = if q < qe { other.col_idx[q] } else { usize::MAX };
                let (c, v) = if cp == cq {
                    let v = alpha * self.values[p] + beta * other.values[q];
                    p += 1;
                    q += 1;
                    (cp, v)
                } else if cp < cq {
                    p += 1;
                    (cp, alpha * self.values[p - 1])
                } else {
                    q += 1;
                    (cq, beta * other.values[q - 1])
                };
                if v.abs() > ZERO_CUTOFF {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            dim: self.dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry magnitude.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut defect = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                defect = defect.max((v - self.get(j, i)).abs());
            }
        }
        defect / scale
    }

    /// True when every stored `(i, j)` has a stored `(j, i)`.
    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.dim).all(|i| {
            self.row(i).all(|(j, _)| {
                let range = self.row_ptr[j]..self.row_ptr[j + 1];
                self.col_idx[range].binary_search(&i).is_ok()
            })
        })
    }

    /// Principal submatrix on a contiguous index range, reindexed from zero.
    /// Entries coupling the range to the outside are discarded.
    pub fn principal_block(&self, range: Range<usize>) -> Self {
        let n = range.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in range.clone() {
            for (j, v) in self.row(i) {
                if range.contains(&j) {
                    col_idx.push(j - range.start);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            dim: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Removes one row and column (used to pin a DOF).
    pub fn without_index(&self, pinned: usize) -> Self {
        let n = self.dim - 1;
        let shift = |j: usize| if j > pinned { j - 1 } else { j };
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for i in (0..self.dim).filter(|&i| i != pinned) {
            for (j, v) in self.row(i) {
                if j != pinned {
                    col_idx.push(shift(j));
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            dim: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Dense copy, for tests and tiny systems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    /// Writes `i j value` lines, for debugging.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v:.16e}")?;
            }
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Stopping rule for [`pcg`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Stop once `‖b - Ax‖ ≤ rel_tol · ‖b‖`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients. `x` holds the initial guess on
/// entry and the solution on exit.
pub fn pcg(a: &SparseOperator, b: &[f64], x: &mut [f64], settings: &CgSettings) -> Result<CgStats> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let diag = a.diagonal();
    let mut inv_diag = Vec::with_capacity(n);
    for (i, d) in diag.iter().enumerate() {
        if !(*d > 0.0) || !d.is_finite() {
            return Err(Error::SingularSystem(format!(
                "non-positive diagonal entry {d:e} at row {i}"
            )));
        }
        inv_diag.push(1.0 / d);
    }

    let mut r = a.mul_vec(x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut res = norm2(&r);
    if res <= settings.rel_tol * b_norm {
        return Ok(CgStats {
            iterations: 0,
            rel_residual: res / b_norm,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for iter in 1..=settings.max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularSystem(format!(
                "operator is not positive definite (pᵀAp = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm2(&r);
        if !res.is_finite() {
            break;
        }
        if res <= settings.rel_tol * b_norm {
            return Ok(CgStats {
                iterations: iter,
                rel_residual: res / b_norm,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDivergence {
        iterations: settings.max_iter,
        residual: res / b_norm,
    })
}
