//! Dense complex linear-algebra kernels.
//!
//! Thin wrappers over nalgebra that fix conventions every other module relies
//! on: descending singular values, a relative rank cutoff with a floor of one,
//! clamping of eigenvalue dust in square roots, and orthonormal subspace bases.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{FockError, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

/// Build a matrix from real row-major data.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| r(data[i * cols + j]))
}

pub fn fro_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral norm (largest singular value); zero for empty matrices.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match svd(m) {
        Ok(s) => s.s.first().copied().unwrap_or(0.0),
        Err(_) => fro_norm(m),
    }
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * r(0.5)
}

/// Cutoff used for every rank decision.
pub fn rank_cutoff(s_max: f64, rank_tol: f64) -> f64 {
    rank_tol * s_max.max(1.0)
}

pub fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, at), (rows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&CMat]) -> CMat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(b);
        at += b.nrows();
    }
    out
}

pub fn block_diag(blocks: &[&CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), (b.nrows(), b.ncols())).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

/// Singular value decomposition `M = U diag(s) V^†` with thin factors.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn svd(m: &CMat) -> Result<Svd> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: zeros(rows, 0),
            s: vec![],
            v: zeros(cols, 0),
        });
    }
    if !is_finite(m) {
        return Err(FockError::SvdFailure { rows, cols });
    }
    let fm = to_faer(m);
    let dec = fm.thin_svd().map_err(|_| FockError::SvdFailure { rows, cols })?;
    let s: Vec<f64> = dec.S().column_vector().iter().map(|z| z.re).collect();
    // guard against silent non-convergence
    let mut us = dec.U().to_owned();
    for (j, &sj) in s.iter().enumerate() {
        for i in 0..rows {
            us[(i, j)] *= sj;
        }
    }
    let recon = &us * dec.V().adjoint() - &fm;
    let mut worst: f64 = 0.0;
    for j in 0..cols {
        for i in 0..rows {
            let e = recon[(i, j)].norm();
            worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
        }
    }
    if worst > 1e-10 * (1.0 + s[0]) {
        return Err(FockError::SvdFailure { rows, cols });
    }
    Ok(Svd {
        u: from_faer(dec.U()),
        s,
        v: from_faer(dec.V()),
    })
}

fn to_faer(m: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Hermitian eigendecomposition, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], zeros(0, 0));
    }
    let h = hermitian_part(m);
    if let Ok(dec) = to_faer(&h).self_adjoint_eigen(faer::Side::Lower) {
        let vals = dec.S().column_vector().iter().map(|z| z.re).collect();
        return (vals, from_faer(dec.U()));
    }
    let dec = nalgebra::SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[a].total_cmp(&dec.eigenvalues[b]));
    let mut vecs = zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &dec.eigenvectors.column(src));
        vals.push(dec.eigenvalues[src]);
    }
    (vals, vecs)
}

/// Eigenvalues of a general square matrix, read off a complex Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return vec![];
    }
    let (_, t) = nalgebra::Schur::new(m.clone()).unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Positive square root of a Hermitian PSD matrix.
///
/// Eigenvalues in `[-tol*scale, dust]` are set to zero, where
/// `scale = max(1, ||M||)` and `dust = 1e-13 * scale`; anything more negative
/// is an error.
pub fn psqrt(m: &CMat, tol: f64) -> Result<CMat> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(FockError::DimensionMismatch(format!(
            "psqrt of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let (vals, vecs) = eigh(m);
    let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if vals[0] < -tol * scale {
        return Err(FockError::NotPsd { min_eig: vals[0] });
    }
    let dust = 1e-13 * scale;
    let roots: Vec<f64> = vals
        .iter()
        .map(|&v| if v <= dust { 0.0 } else { v.sqrt() })
        .collect();
    let mut scaled = vecs.clone();
    for (j, rt) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*rt);
    }
    Ok(hermitian_part(&(scaled * vecs.adjoint())))
}

/// Moore-Penrose pseudo-inverse.
pub fn pinv(m: &CMat, rank_tol: f64) -> Result<CMat> {
    let (rows, cols) = m.shape();
    let dec = svd(m)?;
    let cut = rank_cutoff(dec.s.first().copied().unwrap_or(0.0), rank_tol);
    let mut out = zeros(cols, rows);
    for (k, &s) in dec.s.iter().enumerate() {
        if s > cut {
            out += dec.v.column(k) * dec.u.column(k).adjoint() * r(1.0 / s);
        }
    }
    Ok(out)
}

/// Orthonormal basis of the null space of `m`.
pub fn null_space(m: &CMat, rank_tol: f64) -> Result<CMat> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Ok(zeros(0, 0));
    }
    if rows == 0 {
        return Ok(eye(cols));
    }
    let padded;
    let work = if rows < cols {
        padded = vstack(&[m, &zeros(cols - rows, cols)]);
        &padded
    } else {
        m
    };
    let dec = svd(work)?;
    let cut = rank_cutoff(dec.s[0], rank_tol);
    let keep: Vec<usize> = (0..cols).filter(|&k| dec.s[k] <= cut).collect();
    let mut out = zeros(cols, keep.len());
    for (dst, &k) in keep.iter().enumerate() {
        out.set_column(dst, &dec.v.column(k));
    }
    Ok(out)
}

/// Orthonormal basis of a subspace, stored as the columns of `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub ambient_dim: usize,
    pub basis: CMat,
}

impl SubspaceBasis {
    pub fn zero(ambient_dim: usize) -> Self {
        SubspaceBasis {
            ambient_dim,
            basis: zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        SubspaceBasis {
            ambient_dim,
            basis: eye(ambient_dim),
        }
    }

    /// Wraps columns that are already orthonormal.
    pub fn from_orthonormal(basis: CMat) -> Self {
        SubspaceBasis {
            ambient_dim: basis.nrows(),
            basis,
        }
    }

    /// Orthonormal basis for the span of the given columns.
    pub fn span(cols: &CMat, rank_tol: f64) -> Result<Self> {
        range_basis(cols, rank_tol)
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }

    /// `1 - P` on the ambient space.
    pub fn complement_projector(&self) -> CMat {
        eye(self.ambient_dim) - self.projector()
    }

    pub fn orthogonal_complement(&self, rank_tol: f64) -> Result<Self> {
        if self.dim() == 0 {
            return Ok(Self::full(self.ambient_dim));
        }
        Ok(SubspaceBasis {
            ambient_dim: self.ambient_dim,
            basis: null_space(&self.basis.adjoint(), rank_tol)?,
        })
    }

    /// Largest distance from a unit vector of `other` to this subspace.
    pub fn containment_residual(&self, other: &SubspaceBasis) -> f64 {
        if other.dim() == 0 {
            return 0.0;
        }
        let res = &other.basis - &self.basis * (self.basis.adjoint() * &other.basis);
        op_norm(&res)
    }

    pub fn intersect(&self, other: &SubspaceBasis, rank_tol: f64) -> Result<Self> {
        if self.ambient_dim != other.ambient_dim {
            return Err(FockError::DimensionMismatch(format!(
                "intersecting subspaces of C^{} and C^{}",
                self.ambient_dim, other.ambient_dim
            )));
        }
        if self.dim() == 0 || other.dim() == 0 {
            return Ok(Self::zero(self.ambient_dim));
        }
        // x = S y with (1 - P_other) S y = 0
        let m = other.complement_projector() * &self.basis;
        let y = null_space(&m, rank_tol)?;
        Ok(SubspaceBasis {
            ambient_dim: self.ambient_dim,
            basis: orthonormalize(&(&self.basis * y), rank_tol)?,
        })
    }
}

/// Orthonormal basis of the column span (via SVD, so stable for rank-deficient input).
pub fn orthonormalize(cols: &CMat, rank_tol: f64) -> Result<CMat> {
    Ok(range_basis(cols, rank_tol)?.basis)
}

/// Orthonormal basis for the numerical range of `m`.
pub fn range_basis(m: &CMat, rank_tol: f64) -> Result<SubspaceBasis> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return Ok(SubspaceBasis::zero(rows));
    }
    let dec = svd(m)?;
    let cut = rank_cutoff(dec.s[0], rank_tol);
    let rank = dec.s.iter().filter(|&&s| s > cut).count();
    Ok(SubspaceBasis {
        ambient_dim: rows,
        basis: dec.u.columns(0, rank).into_owned(),
    })
}

/// Numerical rank with the global cutoff convention.
pub fn rank(m: &CMat, rank_tol: f64) -> Result<usize> {
    if m.is_empty() {
        return Ok(0);
    }
    if m.is_square() && max_abs(&(m - m.adjoint())) <= 1e-14 * (1.0 + max_abs(m)) {
        let (vals, _) = eigh(m);
        let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cut = rank_cutoff(top, rank_tol);
        return Ok(vals.iter().filter(|v| v.abs() > cut).count());
    }
    let dec = svd(m)?;
    let cut = rank_cutoff(dec.s[0], rank_tol);
    Ok(dec.s.iter().filter(|&&s| s > cut).count())
}

/// Largest subspace `S` of `k` with `op S ⊆ S` for every op.
///
/// Iterates `S <- S ∩ ⋂ op^{-1}(S)`; each pass either stops or lowers the
/// dimension, so at most `ambient_dim` passes are needed.
pub fn largest_coinvariant_in(
    k: &SubspaceBasis,
    ops: &[CMat],
    rank_tol: f64,
) -> Result<SubspaceBasis> {
    let n = k.ambient_dim;
    for (i, op) in ops.iter().enumerate() {
        if op.shape() != (n, n) {
            return Err(FockError::DimensionMismatch(format!(
                "operator {i} is {}x{} on C^{n}",
                op.nrows(),
                op.ncols()
            )));
        }
    }
    let mut s = k.clone();
    loop {
        if s.dim() == 0 || ops.is_empty() {
            return Ok(s);
        }
        let comp = s.complement_projector();
        let parts: Vec<CMat> = ops.iter().map(|op| &comp * op * &s.basis).collect();
        let refs: Vec<&CMat> = parts.iter().collect();
        let stacked = vstack(&refs);
        let y = null_space(&stacked, rank_tol)?;
        if y.ncols() == s.dim() {
            return Ok(s);
        }
        s = SubspaceBasis {
            ambient_dim: n,
            basis: orthonormalize(&(&s.basis * y), rank_tol)?,
        };
    }
}

/// Unitary (or partial isometry) factor of the polar decomposition `M = U |M|`.
pub fn polar_factor(m: &CMat) -> Result<CMat> {
    let dec = svd(m)?;
    Ok(&dec.u * dec.v.adjoint())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Column-stacking vectorisation.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVec, n: usize) -> CMat {
    CMat::from_column_slice(n, n, v.as_slice())
}
