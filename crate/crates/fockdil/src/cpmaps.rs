//! Completely positive maps `Φ_T(X) = Σ T_i X T_i^*`, their fixed points and
//! the compression map `κ` between fixed-point sets of a lifting and its base.

use crate::config::{max_iter, Tolerances};
use crate::error::{FockError, Result};
use crate::liftings::Lifting;
use crate::numkit::{block_diag, eye, fro_norm, kron, null_space, op_norm, unvec, vec_of, zeros, CMat, C64};
use crate::tuples::{self, OperatorTuple};

/// Above this dimension powers are taken by repeated application instead of
/// squaring the `dim² × dim²` superoperator.
pub const SUPEROP_DIM_LIMIT: usize = 24;

/// `Φ_T` together with its superoperator `S = Σ conj(T_i) ⊗ T_i`, so that
/// `S·vec(X) = vec(Φ_T(X))` for column-stacked `vec`.
#[derive(Debug, Clone)]
pub struct CPMap {
    pub t: OperatorTuple,
    s: Option<CMat>,
}

impl CPMap {
    pub fn new(t: &OperatorTuple) -> Self {
        CPMap { t: t.clone(), s: None }
    }

    pub fn dim(&self) -> usize {
        self.t.dim()
    }

    pub fn superoperator(&self) -> CMat {
        match &self.s {
            Some(s) => s.clone(),
            None => build_superoperator(&self.t),
        }
    }

    /// `Φ(X)` from the Kraus form.
    pub fn apply_once(&self, x: &CMat) -> CMat {
        kraus_apply(&self.t, x)
    }

    /// `Φ^n(X)`; binary powering of the superoperator for `n > 32` on small spaces.
    pub fn apply(&self, x: &CMat, n: u64) -> CMat {
        if n <= 32 || self.dim() > SUPEROP_DIM_LIMIT {
            let mut y = x.clone();
            for _ in 0..n {
                y = kraus_apply(&self.t, &y);
            }
            return y;
        }
        let mut base = self.superoperator();
        let mut v = vec_of(x);
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                v = &base * v;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        unvec(&v, self.dim())
    }

    /// Frobenius-orthonormal basis of `{X : Φ(X) = X}`.
    pub fn fixed_points(&self, tol_fix: f64) -> Result<Vec<CMat>> {
        let n = self.dim();
        let s = self.superoperator() - eye(n * n);
        let ker = null_space(&s, tol_fix)?;
        Ok((0..ker.ncols())
            .map(|k| unvec(&ker.column(k).into_owned(), n))
            .collect())
    }

    /// Basis of the fixed points consisting of Hermitian matrices, orthonormal
    /// for the real Frobenius inner product. Its length equals the complex
    /// dimension of the fixed-point space because that space is `*`-closed.
    pub fn hermitian_fixed_points(&self, tol_fix: f64) -> Result<Vec<CMat>> {
        let fix = self.fixed_points(tol_fix)?;
        hermitian_basis(&fix, self.dim())
    }
}

fn build_superoperator(t: &OperatorTuple) -> CMat {
    let n = t.dim();
    let mut s = zeros(n * n, n * n);
    for m in &t.mats {
        s += kron(&m.map(|z| z.conj()), m);
    }
    s
}

pub fn kraus_apply(t: &OperatorTuple, x: &CMat) -> CMat {
    let n = t.dim();
    t.mats
        .iter()
        .fold(zeros(n, n), |acc, m| acc + m * x * m.adjoint())
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Real-orthonormal Hermitian basis for the span of a `*`-closed family.
pub fn hermitian_basis(mats: &[CMat], n: usize) -> Result<Vec<CMat>> {
    if mats.is_empty() {
        return Ok(vec![]);
    }
    let half = C64::new(0.5, 0.0);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for m in mats {
        let re_part = (m + m.adjoint()) * half;
        let im_part = (m - m.adjoint()) * C64::new(0.0, -0.5);
        for h in [re_part, im_part] {
            let mut v = Vec::with_capacity(2 * n * n);
            v.extend(h.iter().map(|z| z.re));
            v.extend(h.iter().map(|z| z.im));
            cols.push(v);
        }
    }
    // pivoted Gram-Schmidt in the real coordinates, two passes per vector
    let scale = cols.iter().map(|v| norm2(v)).fold(0.0, f64::max).max(1.0);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut rest = cols;
    while basis.len() < mats.len() && !rest.is_empty() {
        for v in rest.iter_mut() {
            for _ in 0..2 {
                for b in &basis {
                    let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
                }
            }
        }
        let (k, best) = rest
            .iter()
            .enumerate()
            .map(|(k, v)| (k, norm2(v)))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        if best <= 1e-9 * scale {
            break;
        }
        let v = rest.swap_remove(k);
        basis.push(v.iter().map(|x| x / best).collect());
    }
    let out = basis
        .iter()
        .map(|col| {
            let h = CMat::from_fn(n, n, |i, j| {
                let p = i + j * n;
                C64::new(col[p], col[p + n * n])
            });
            crate::numkit::hermitian_part(&h)
        })
        .collect();
    Ok(out)
}

/// Iterates `Y ← Φ^{2^k}(Y)` (or `Y ← Φ(Y)` on large spaces) from `Φ(x0)`
/// until successive iterates differ by less than `tol`.
///
/// Returns the limit, the number of applications of `Φ` it represents, and the
/// last difference.
pub fn limit_of_powers(t: &OperatorTuple, x0: &CMat, tol: f64) -> Result<(CMat, u64, f64)> {
    let n = t.dim();
    let cap = max_iter(n);
    if n <= SUPEROP_DIM_LIMIT {
        let mut sp = build_superoperator(t);
        let mut y = &sp * vec_of(x0);
        let mut horizon: u64 = 1;
        let mut residual = f64::INFINITY;
        for _ in 0..cap.min(62) {
            let next = &sp * &y;
            residual = (&next - &y).norm();
            y = next;
            horizon *= 2;
            if residual < tol {
                return Ok((unvec(&y, n), horizon, residual));
            }
            sp = &sp * &sp;
        }
        return Err(FockError::ConvergenceFailure {
            iterations: horizon as usize,
            residual,
        });
    }
    let mut y = kraus_apply(t, x0);
    let mut residual = f64::INFINITY;
    for k in 1..=cap {
        let next = kraus_apply(t, &y);
        residual = fro_norm(&(&next - &y));
        y = next;
        if residual < tol {
            return Ok((y, k as u64 + 1, residual));
        }
    }
    Err(FockError::ConvergenceFailure {
        iterations: cap,
        residual,
    })
}

/// `κ(X) = p_C X p_C`, read as the top-left `m_c` block.
pub fn kappa(x: &CMat, m_c: usize) -> CMat {
    x.view((0, 0), (m_c, m_c)).into_owned()
}

/// `x ⊕ 0` on `𝓗_C ⊕ 𝓗_A`.
pub fn pad(x: &CMat, m_a: usize) -> CMat {
    block_diag(&[x, &zeros(m_a, m_a)])
}

/// Preimage of a fixed point `x` of `Φ_C` under `κ`, as the limit of
/// `Φ_E^n(x ⊕ 0)`.
pub fn kappa_inverse(l: &Lifting, x: &CMat, tol: &Tolerances) -> Result<CMat> {
    let phi_c = CPMap::new(&l.c);
    let res = op_norm(&(phi_c.apply_once(x) - x));
    if res > tol.fix.max(1e-8) * (1.0 + op_norm(x)) {
        return Err(FockError::NotInvariant { residual: res });
    }
    let e = l.total();
    let (limit, _, _) = limit_of_powers(&e, &pad(x, l.dim_a()), 1e-10)?;
    let fix_res = op_norm(&(kraus_apply(&e, &limit) - &limit));
    if fix_res > 1e-7 * (1.0 + op_norm(&limit)) {
        return Err(FockError::ConvergenceFailure {
            iterations: max_iter(e.dim()),
            residual: fix_res,
        });
    }
    Ok(limit)
}

/// `(E ergodic, C ergodic, A *-stable)` for a lifting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ErgodicTriple {
    pub erg_e: bool,
    pub erg_c: bool,
    pub star_stable_a: bool,
}

impl ErgodicTriple {
    /// `E` ergodic exactly when `C` is ergodic and `A` is `*`-stable.
    pub fn biconditional_holds(&self) -> bool {
        self.erg_e == (self.erg_c && self.star_stable_a)
    }
}

pub fn ergodic_lifting_check(l: &Lifting, tol: &Tolerances) -> Result<ErgodicTriple> {
    let erg_e = tuples::is_ergodic(&l.total(), tol)?;
    let erg_c = tuples::is_ergodic(&l.c, tol)?;
    let star_stable_a = if l.dim_a() == 0 {
        true
    } else {
        tuples::stability_report(&l.a, tol)?.star_stable
    };
    Ok(ErgodicTriple {
        erg_e,
        erg_c,
        star_stable_a,
    })
}
