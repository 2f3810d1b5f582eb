//! Compressed sparse row matrices and tuples.
//!
//! Only what the large truncated examples need: products, adjoints, traces and
//! the word recursions `X ↦ X T_j^*`. Dense kernels in `numkit` remain the
//! default everywhere else.

use crate::fock::TruncatedFock;
use crate::numkit::{zeros, CMat, C64, ONE, ZERO};
use crate::tuples::OperatorTuple;

#[derive(Debug, Clone, PartialEq)]
pub struct SpMat {
    pub rows: usize,
    pub cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SpMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SpMat {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: vec![],
            values: vec![],
        }
    }

    /// Duplicate entries are summed; exact zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut trips: Vec<(usize, usize, C64)>) -> Self {
        trips.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut values: Vec<C64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trips {
            assert!(r < rows && c < cols, "triplet ({r},{c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        SpMat {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
        .pruned()
    }

    fn pruned(self) -> Self {
        if self.values.iter().all(|v| *v != ZERO) {
            return self;
        }
        let mut trips = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != ZERO {
                    trips.push((r, self.indices[k], self.values[k]));
                }
            }
        }
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut values = Vec::with_capacity(trips.len());
        for (r, c, v) in trips {
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..self.rows {
            indptr[r + 1] += indptr[r];
        }
        SpMat {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &CMat) -> Self {
        let mut trips = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != ZERO {
                    trips.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), trips)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![ONE; n])
    }

    pub fn diag(vals: &[C64]) -> Self {
        let n = vals.len();
        Self::from_triplets(n, n, vals.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.cols,
            self.rows,
            self.iter().map(|(r, c, v)| (c, r, v.conj())).collect(),
        )
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out.pruned()
    }

    pub fn add(&self, other: &SpMat) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let trips = self.iter().chain(other.iter()).collect();
        Self::from_triplets(self.rows, self.cols, trips)
    }

    pub fn sub(&self, other: &SpMat) -> Self {
        self.add(&other.scale(-ONE))
    }

    /// Gustavson row-by-row product.
    pub fn matmul(&self, other: &SpMat) -> Self {
        assert_eq!(self.cols, other.rows, "sparse product shape mismatch");
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![ZERO; other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut touched = Vec::new();
        for r in 0..self.rows {
            touched.clear();
            for k in self.indptr[r]..self.indptr[r + 1] {
                let (mid, a) = (self.indices[k], self.values[k]);
                for kk in other.indptr[mid]..other.indptr[mid + 1] {
                    let c = other.indices[kk];
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = ZERO;
                        touched.push(c);
                    }
                    acc[c] += a * other.values[kk];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != ZERO {
                    indices.push(c);
                    values.push(acc[c]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        SpMat {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            values,
        }
    }

    /// `self · x` for dense `x`.
    pub fn mul_dense(&self, x: &CMat) -> CMat {
        assert_eq!(self.cols, x.nrows());
        let mut out = zeros(self.rows, x.ncols());
        for (r, c, v) in self.iter() {
            for j in 0..x.ncols() {
                out[(r, j)] += v * x[(c, j)];
            }
        }
        out
    }

    /// `x · self` for dense `x`.
    pub fn left_mul_dense(&self, x: &CMat) -> CMat {
        assert_eq!(x.ncols(), self.rows);
        let mut out = zeros(x.nrows(), self.cols);
        for (r, c, v) in self.iter() {
            for i in 0..x.nrows() {
                out[(i, c)] += x[(i, r)] * v;
            }
        }
        out
    }

    /// `x · self^*` for dense `x`.
    pub fn left_mul_dense_adjoint(&self, x: &CMat) -> CMat {
        assert_eq!(x.ncols(), self.cols);
        let mut out = zeros(x.nrows(), self.rows);
        for (r, c, v) in self.iter() {
            let vc = v.conj();
            for i in 0..x.nrows() {
                out[(i, r)] += x[(i, c)] * vc;
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        self.iter().filter(|(r, c, _)| r == c).map(|(_, _, v)| v).sum()
    }

    pub fn frob2(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.iter().all(|(r, c, v)| r == c || v.norm() <= tol)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        let mut d = vec![ZERO; self.rows.min(self.cols)];
        for (r, c, v) in self.iter() {
            if r == c {
                d[r] += v;
            }
        }
        d
    }

    /// `‖P² − P‖_max ≤ tol` and `‖P − P^*‖_max ≤ tol`.
    pub fn is_projection(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        self.matmul(self).sub(self).max_abs() <= tol && self.sub(&self.adjoint()).max_abs() <= tol
    }

    /// Rank of a diagonal matrix: count of entries above `tol`.
    pub fn diagonal_rank(&self, tol: f64) -> Option<usize> {
        if !self.is_diagonal(0.0) {
            return None;
        }
        Some(self.diagonal().iter().filter(|v| v.norm() > tol).count())
    }
}

/// A tuple of sparse square matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTuple {
    pub mats: Vec<SpMat>,
}

impl SparseTuple {
    pub fn from_dense(t: &OperatorTuple) -> Self {
        SparseTuple {
            mats: t.mats.iter().map(SpMat::from_dense).collect(),
        }
    }

    pub fn to_dense(&self) -> OperatorTuple {
        OperatorTuple {
            mats: self.mats.iter().map(|m| m.to_dense()).collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.mats.len()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].rows
    }

    /// `Φ(X) = Σ T_i X T_i^*`.
    pub fn cp_apply(&self, x: &SpMat) -> SpMat {
        let mut acc = SpMat::zeros(self.dim(), self.dim());
        for t in &self.mats {
            acc = acc.add(&t.matmul(x).matmul(&t.adjoint()));
        }
        acc
    }

    pub fn row_gram(&self) -> SpMat {
        self.cp_apply(&SpMat::identity(self.dim()))
    }
}

/// Sparse creation operators on `Γ_{≤N}(ℂ^d)`.
pub fn creation_ops_sparse(f: &TruncatedFock) -> SparseTuple {
    let n = f.total_dim();
    let mats = (1..=f.d)
        .map(|i| {
            let trips = (0..n)
                .filter_map(|idx| f.prepend_index(i, idx).map(|to| (to, idx, ONE)))
                .collect();
            SpMat::from_triplets(n, n, trips)
        })
        .collect();
    SparseTuple { mats }
}

/// Right multiplication by adjoints, the step of every word recursion
/// `X_{jα} = X_α T_j^*`.
pub trait TupleAction {
    fn d(&self) -> usize;
    fn dim(&self) -> usize;
    /// `x · T_j^*` (0-based `j`).
    fn mul_adjoint(&self, x: &CMat, j: usize) -> CMat;
    /// `x · T_j` (0-based `j`).
    fn mul(&self, x: &CMat, j: usize) -> CMat;
}

impl TupleAction for OperatorTuple {
    fn d(&self) -> usize {
        self.mats.len()
    }

    fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    fn mul_adjoint(&self, x: &CMat, j: usize) -> CMat {
        x * self.mats[j].adjoint()
    }

    fn mul(&self, x: &CMat, j: usize) -> CMat {
        x * &self.mats[j]
    }
}

impl TupleAction for SparseTuple {
    fn d(&self) -> usize {
        self.mats.len()
    }

    fn dim(&self) -> usize {
        self.mats[0].rows
    }

    fn mul_adjoint(&self, x: &CMat, j: usize) -> CMat {
        self.mats[j].left_mul_dense_adjoint(x)
    }

    fn mul(&self, x: &CMat, j: usize) -> CMat {
        self.mats[j].left_mul_dense(x)
    }
}

/// Visits `X_α = X_0 T_α^*` for all `|α| ≤ n` in depth-first order, passing
/// the Fock index of `α` (in `Γ_{≤n}(ℂ^d)`) and the block.
pub fn visit_word_blocks<A: TupleAction, F: FnMut(usize, &CMat)>(t: &A, x0: &CMat, n: usize, mut f: F) {
    let fock = TruncatedFock::new(t.d(), n);
    let mut stack: Vec<(usize, CMat)> = vec![(0, x0.clone())];
    while let Some((idx, x)) = stack.pop() {
        f(idx, &x);
        for j in (1..=t.d()).rev() {
            if let Some(child) = fock.prepend_index(j, idx) {
                stack.push((child, t.mul_adjoint(&x, j - 1)));
            }
        }
    }
}

/// [`visit_word_blocks`] with sparse blocks, for tuples whose word products
/// stay sparse (shifts, creation operators).
pub fn visit_sparse_word_blocks<F: FnMut(usize, &SpMat)>(t: &SparseTuple, x0: &SpMat, n: usize, mut f: F) {
    let fock = TruncatedFock::new(t.d(), n);
    let adj: Vec<SpMat> = t.mats.iter().map(SpMat::adjoint).collect();
    let mut stack: Vec<(usize, SpMat)> = vec![(0, x0.clone())];
    while let Some((idx, x)) = stack.pop() {
        f(idx, &x);
        for j in (1..=t.d()).rev() {
            if let Some(child) = fock.prepend_index(j, idx) {
                stack.push((child, x.matmul(&adj[j - 1])));
            }
        }
    }
}

/// All blocks `X_0 T_α^*` for `|α| ≤ n`, in Fock index order.
pub fn word_blocks<A: TupleAction>(t: &A, x0: &CMat, n: usize) -> Vec<CMat> {
    let fock = TruncatedFock::new(t.d(), n);
    let mut out: Vec<CMat> = Vec::with_capacity(fock.total_dim());
    out.push(x0.clone());
    for idx in 1..fock.total_dim() {
        let (j, parent) = fock.split_first(idx).expect("non-empty word");
        let next = t.mul_adjoint(&out[parent], j - 1);
        out.push(next);
    }
    out
}
