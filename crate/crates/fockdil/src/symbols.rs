//! Multi-analytic symbols `θ = {θ_α}` and the operators `M_θ` they determine
//! on truncated Fock spaces.
//!
//! `M_θ(e_γ ⊗ k) = Σ_α e_{γα} ⊗ θ_α k`. Every product or extension is exact
//! only on a range of levels; functions that lose information at the
//! truncation edge say which levels remain trustworthy.

use crate::error::{FockError, Result};
use crate::fock::{fock_dim, lex_index, TruncatedFock, Word};
use crate::numkit::{eye, fro_norm, op_norm, polar_factor, psqrt, r, vstack, zeros, CMat};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiAnalyticSymbol {
    pub d: usize,
    /// Longest coefficient word kept.
    pub n: usize,
    pub dom_dim: usize,
    pub cod_dim: usize,
    /// Coefficients in Fock index order of `Γ_{≤n}(ℂ^d)`.
    pub coeffs: Vec<CMat>,
}

/// Index of `γα` in `Γ_{≤n}` from the lengths and level positions of both words.
fn concat_index(fock: &TruncatedFock, lg: usize, pg: usize, la: usize, pa: usize) -> usize {
    fock.level_range(lg + la).start + pg * fock.d.pow(la as u32) + pa
}

impl MultiAnalyticSymbol {
    pub fn zero(d: usize, n: usize, dom_dim: usize, cod_dim: usize) -> Self {
        MultiAnalyticSymbol {
            d,
            n,
            dom_dim,
            cod_dim,
            coeffs: vec![zeros(cod_dim, dom_dim); fock_dim(d, n)],
        }
    }

    /// `θ_0 = 1`, all other coefficients zero.
    pub fn identity(d: usize, n: usize, dim: usize) -> Self {
        let mut s = Self::zero(d, n, dim, dim);
        s.coeffs[0] = eye(dim);
        s
    }

    pub fn fock(&self) -> TruncatedFock {
        TruncatedFock::new(self.d, self.n)
    }

    pub fn coeff(&self, w: &Word) -> CMat {
        if w.len() > self.n {
            return zeros(self.cod_dim, self.dom_dim);
        }
        self.coeffs[self.fock().index(w)].clone()
    }

    pub fn set_coeff(&mut self, w: &Word, m: CMat) {
        assert_eq!(m.shape(), (self.cod_dim, self.dom_dim));
        let idx = self.fock().index(w);
        self.coeffs[idx] = m;
    }

    /// Length of the longest word with a coefficient above `tol` (0 if none).
    pub fn effective_degree(&self, tol: f64) -> usize {
        let f = self.fock();
        (0..self.coeffs.len())
            .filter(|&i| fro_norm(&self.coeffs[i]) > tol)
            .map(|i| f.length_of(i))
            .max()
            .unwrap_or(0)
    }

    /// Keeps coefficients up to length `n` (padding with zeros when `n` grows).
    pub fn truncated(&self, n: usize) -> Self {
        let mut out = Self::zero(self.d, n, self.dom_dim, self.cod_dim);
        let keep = fock_dim(self.d, n.min(self.n));
        out.coeffs[..keep].clone_from_slice(&self.coeffs[..keep]);
        out
    }

    /// The column `(θ_α)_α : 𝓓 → Γ_{≤n} ⊗ 𝓓'`.
    pub fn stacked(&self) -> CMat {
        let refs: Vec<&CMat> = self.coeffs.iter().collect();
        vstack(&refs)
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.stacked())
    }

    /// Frobenius norm of each coefficient, in Fock index order.
    pub fn coefficient_norms(&self) -> Vec<(Word, f64)> {
        let f = self.fock();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (f.word(i), fro_norm(c)))
            .collect()
    }

    /// `θ v` for a map `v` into the domain.
    pub fn right_mul(&self, v: &CMat) -> Self {
        MultiAnalyticSymbol {
            d: self.d,
            n: self.n,
            dom_dim: v.ncols(),
            cod_dim: self.cod_dim,
            coeffs: self.coeffs.iter().map(|c| c * v).collect(),
        }
    }

    /// `u θ` for a map `u` out of the codomain.
    pub fn left_mul(&self, u: &CMat) -> Self {
        MultiAnalyticSymbol {
            d: self.d,
            n: self.n,
            dom_dim: self.dom_dim,
            cod_dim: u.nrows(),
            coeffs: self.coeffs.iter().map(|c| u * c).collect(),
        }
    }
}

/// `M_θ` from `Γ_{≤n_out} ⊗ 𝓓` to `Γ_{≤n_out} ⊗ 𝓓'`; terms landing above
/// `n_out` are dropped.
pub fn extend(theta: &MultiAnalyticSymbol, n_out: usize) -> CMat {
    let f = TruncatedFock::new(theta.d, n_out);
    let fc = theta.fock();
    let (p, q) = (theta.dom_dim, theta.cod_dim);
    let mut m = zeros(f.total_dim() * q, f.total_dim() * p);
    for lg in 0..=n_out {
        for pg in 0..f.level_size(lg) {
            let col = f.level_range(lg).start + pg;
            for la in 0..=theta.n.min(n_out - lg) {
                for pa in 0..fc.level_size(la) {
                    let c = &theta.coeffs[fc.level_range(la).start + pa];
                    if c.iter().all(|z| z.norm_sqr() == 0.0) {
                        continue;
                    }
                    let row = concat_index(&f, lg, pg, la, pa);
                    m.view_mut((row * q, col * p), (q, p)).copy_from(c);
                }
            }
        }
    }
    m
}

/// Symbol of `M_θ M_η`: `(θ∘η)_γ = Σ_{γ = βα} θ_α η_β`, kept up to
/// `min(θ.n, η.n)` where every split of `γ` is available.
pub fn compose(theta: &MultiAnalyticSymbol, eta: &MultiAnalyticSymbol) -> Result<MultiAnalyticSymbol> {
    if theta.d != eta.d || theta.dom_dim != eta.cod_dim {
        return Err(FockError::DimensionMismatch(format!(
            "cannot compose θ: {}→{} (d={}) after η: {}→{} (d={})",
            theta.dom_dim, theta.cod_dim, theta.d, eta.dom_dim, eta.cod_dim, eta.d
        )));
    }
    let n = theta.n.min(eta.n);
    let f = TruncatedFock::new(theta.d, n);
    let mut out = MultiAnalyticSymbol::zero(theta.d, n, eta.dom_dim, theta.cod_dim);
    for idx in 0..f.total_dim() {
        let w = f.word(idx);
        let mut acc = zeros(theta.cod_dim, eta.dom_dim);
        for split in 0..=w.len() {
            let beta = Word::new(&w.0[..split]);
            let alpha = Word::new(&w.0[split..]);
            acc += theta.coeff(&alpha) * eta.coeff(&beta);
        }
        out.coeffs[idx] = acc;
    }
    Ok(out)
}

/// Coefficient form of `M_θ^* M_θ`.
#[derive(Debug, Clone)]
pub struct GramDefect {
    /// `Σ_α θ_α^* θ_α`.
    pub gram0: CMat,
    /// `Σ_α θ_{βα}^* θ_α` for `1 ≤ |β| ≤ n`, in Fock index order (entry 0 unused).
    pub cross: Vec<(Word, CMat)>,
    pub gram0_defect: f64,
    pub max_cross: f64,
    pub inner: bool,
}

pub fn gram_defect(theta: &MultiAnalyticSymbol, tol_inner: f64) -> GramDefect {
    let f = theta.fock();
    let p = theta.dom_dim;
    let gram0 = theta
        .coeffs
        .iter()
        .fold(zeros(p, p), |acc, c| acc + c.adjoint() * c);
    let mut cross = Vec::new();
    let mut max_cross: f64 = 0.0;
    for bidx in 1..f.total_dim() {
        let beta = f.word(bidx);
        let lb = beta.len();
        let pb = lex_index(&beta, theta.d);
        let mut acc = zeros(p, p);
        for la in 0..=theta.n - lb {
            for pa in 0..f.level_size(la) {
                let a_idx = f.level_range(la).start + pa;
                let ba_idx = concat_index(&f, lb, pb, la, pa);
                acc += theta.coeffs[ba_idx].adjoint() * &theta.coeffs[a_idx];
            }
        }
        max_cross = max_cross.max(op_norm(&acc));
        cross.push((beta, acc));
    }
    let gram0_defect = op_norm(&(&gram0 - eye(p)));
    GramDefect {
        inner: gram0_defect < tol_inner && max_cross < tol_inner,
        gram0,
        cross,
        gram0_defect,
        max_cross,
    }
}

#[derive(Debug, Clone)]
pub struct Equivalence {
    /// Unitary with `θ ≈ θ' v`, when the domains have equal dimension.
    pub v: Option<CMat>,
    pub residual: f64,
    pub equivalent: bool,
}

/// Orthogonal Procrustes fit of `θ ≈ θ' v` over the common coefficient range.
pub fn equivalent(theta: &MultiAnalyticSymbol, theta_p: &MultiAnalyticSymbol, tol: f64) -> Equivalence {
    if theta.d != theta_p.d || theta.cod_dim != theta_p.cod_dim || theta.dom_dim != theta_p.dom_dim {
        return Equivalence {
            v: None,
            residual: f64::INFINITY,
            equivalent: false,
        };
    }
    let n = theta.n.min(theta_p.n);
    let k = fock_dim(theta.d, n);
    let p = theta.dom_dim;
    let mut m = zeros(p, p);
    for i in 0..k {
        m += theta_p.coeffs[i].adjoint() * &theta.coeffs[i];
    }
    let v = if p == 0 {
        zeros(0, 0)
    } else {
        match polar_factor(&m) {
            Ok(v) => v,
            Err(_) => {
                return Equivalence {
                    v: None,
                    residual: f64::INFINITY,
                    equivalent: false,
                }
            }
        }
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..k {
        num += fro_norm(&(&theta.coeffs[i] - &theta_p.coeffs[i] * &v)).powi(2);
        den += fro_norm(&theta.coeffs[i]).powi(2);
    }
    let residual = if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    };
    Equivalence {
        v: Some(v),
        residual,
        equivalent: residual < tol,
    }
}

/// `Δ = (1 − M^*M)^{1/2}` for `M = extend(θ, n_out)`, with the number of the
/// top level on which it is exact (`n_out − deg θ`).
pub fn symbol_delta(theta: &MultiAnalyticSymbol, n_out: usize, tol: f64) -> Result<(CMat, usize)> {
    let m = extend(theta, n_out);
    let n = m.ncols();
    let delta = psqrt(&(eye(n) - m.adjoint() * &m), tol)?;
    let valid = n_out.saturating_sub(theta.effective_degree(0.0));
    Ok((delta, valid))
}

/// `(L_i ⊗ 1_r)` on `Γ_{≤n} ⊗ ℂ^r`.
pub fn creation_tensor(d: usize, n: usize, r_dim: usize, i: usize) -> CMat {
    let f = TruncatedFock::new(d, n);
    let mut m = zeros(f.total_dim() * r_dim, f.total_dim() * r_dim);
    for idx in 0..f.total_dim() {
        if let Some(to) = f.prepend_index(i, idx) {
            for k in 0..r_dim {
                m[(to * r_dim + k, idx * r_dim + k)] = r(1.0);
            }
        }
    }
    m
}
