//! Characteristic functions: Popescu's `θ_T`, the characteristic function
//! `Θ_{C,E}` of a lifting, the extended characteristic function of an ergodic
//! coisometric tuple, constrained compressions, the functional model and the
//! cocycle product converging to the Poisson kernel.
//!
//! Lifting characteristic functions are computed through generator maps: for
//! every word `α` a matrix `G_α : ⊕_i ℂ^m → ⊕_i ℂ^{m_C}` with
//! `G_α x = Θ_α(D_E x)` in ambient coordinates. Coefficients in defect
//! coordinates are then `Q_C^† G_α D_E^+ Q_E`.

use crate::config::Tolerances;
use crate::error::{FockError, Result};
use crate::fock::{constrained_fock, constraint_residual, ConstraintSet, TruncatedFock};
use crate::liftings::{classify, Lifting};
use crate::numkit::{
    block_diag, eye, hstack, kron, largest_coinvariant_in, null_space, op_norm, orthonormalize, pinv, psqrt,
    zeros, CMat, CVec, SubspaceBasis, C64,
};
use crate::sparse::{word_blocks, TupleAction};
use crate::symbols::{creation_tensor, extend, MultiAnalyticSymbol};
use crate::tuples::{defects, eigen_frame, frame_unitary, is_coisometric, is_ergodic, restrict_off_omega, EigenFrame, OperatorTuple};

/// Popescu's characteristic function `θ_T : 𝓓 → Γ_{≤N} ⊗ 𝓓_*` in the
/// coordinates of `defect` and `defect_star`.
pub fn popescu_char(t: &OperatorTuple, n: usize, tol: &Tolerances) -> Result<MultiAnalyticSymbol> {
    let dd = defects(t, tol)?;
    let (h, d) = (t.dim(), t.d());
    let qs = &dd.defect_star.basis;
    let qd = &dd.defect.basis;
    let f = TruncatedFock::new(d, n);
    let mut theta = MultiAnalyticSymbol::zero(d, n, qd.ncols(), qs.ncols());
    theta.coeffs[0] = -(qs.adjoint() * t.row() * qd);
    if n == 0 {
        return Ok(theta);
    }
    let x = word_blocks(t, &dd.dstar, n - 1);
    let rows: Vec<CMat> = (0..d).map(|j| dd.dfull.rows(j * h, h) * qd).collect();
    for (idx, xa) in x.iter().enumerate() {
        let qx = qs.adjoint() * xa;
        for (j, rj) in rows.iter().enumerate() {
            let to = f.prepend_index(j + 1, idx).expect("word below top level");
            theta.coeffs[to] = &qx * rj;
        }
    }
    Ok(theta)
}

/// Generator-level Popescu coefficients `x ↦ θ_α(D x)` as maps
/// `ℂ^{d·dim} → ℂ^dim` (ambient coordinates).
pub fn popescu_generators(t: &OperatorTuple, n: usize, tol: &Tolerances) -> Result<Vec<CMat>> {
    let dd = defects(t, tol)?;
    let (h, d) = (t.dim(), t.d());
    let f = TruncatedFock::new(d, n);
    let mut out = vec![zeros(h, d * h); f.total_dim()];
    out[0] = -(t.row() * &dd.dfull);
    if n == 0 {
        return Ok(out);
    }
    let d2 = &dd.dfull * &dd.dfull;
    let x = word_blocks(t, &dd.dstar, n - 1);
    for (idx, xa) in x.iter().enumerate() {
        for j in 0..d {
            let to = f.prepend_index(j + 1, idx).expect("word below top level");
            out[to] = xa * d2.rows(j * h, h);
        }
    }
    Ok(out)
}

/// Visits the generator maps `G_α` of the lifting with blocks `C` (through
/// `D_C`), `A`, `B` and `W = γD_{*,A}`, in depth-first order.
///
/// Column layout: slot `i` occupies `i·m .. (i+1)·m` with `m = m_C + m_A`, the
/// `𝓗_C` part first. For `h ∈ 𝓗_C`: `G_0 = (D_C)_i − W B_i`,
/// `G_α = −W A_α^* B_i`. For `h ∈ 𝓗_A`: `G_0 = −W A_i`,
/// `G_{jβ} = W A_β^*(δ_ji − A_j^*A_i)`.
pub fn visit_generators<A: TupleAction, F: FnMut(usize, &CMat)>(
    a: &A,
    dc: &CMat,
    w: &CMat,
    b: &[CMat],
    n: usize,
    mut visit: F,
) {
    let d = b.len();
    let m_c = dc.nrows() / d;
    let m_a = w.ncols();
    let m = m_c + m_a;
    let rows = d * m_c;
    let fock = TruncatedFock::new(d, n);

    let mut g0 = zeros(rows, d * m);
    for i in 0..d {
        let c_part = dc.columns(i * m_c, m_c) - w * &b[i];
        g0.view_mut((0, i * m), (rows, m_c)).copy_from(&c_part);
        if m_a > 0 {
            let a_part = -a.mul(w, i);
            g0.view_mut((0, i * m + m_c), (rows, m_a)).copy_from(&a_part);
        }
    }
    visit(0, &g0);

    // (index, first letter, P_α, P_β) with α = jβ
    let mut stack: Vec<(usize, usize, CMat, CMat)> = Vec::new();
    for j in (1..=d).rev() {
        if let Some(child) = fock.prepend_index(j, 0) {
            stack.push((child, j, a.mul_adjoint(w, j - 1), w.clone()));
        }
    }
    while let Some((idx, j, p, parent)) = stack.pop() {
        let mut g = zeros(rows, d * m);
        for i in 0..d {
            let c_part = -(&p * &b[i]);
            g.view_mut((0, i * m), (rows, m_c)).copy_from(&c_part);
            if m_a > 0 {
                let mut a_part = -a.mul(&p, i);
                if i + 1 == j {
                    a_part += &parent;
                }
                g.view_mut((0, i * m + m_c), (rows, m_a)).copy_from(&a_part);
            }
        }
        visit(idx, &g);
        for jj in (1..=d).rev() {
            if let Some(child) = fock.prepend_index(jj, idx) {
                stack.push((child, jj, a.mul_adjoint(&p, jj - 1), p.clone()));
            }
        }
    }
}

/// All generator maps in Fock index order.
pub fn generators<A: TupleAction>(a: &A, dc: &CMat, w: &CMat, b: &[CMat], n: usize) -> Vec<CMat> {
    let d = b.len();
    let total = TruncatedFock::new(d, n).total_dim();
    let mut out = vec![CMat::zeros(0, 0); total];
    visit_generators(a, dc, w, b, n, |idx, g| out[idx] = g.clone());
    out
}

/// A lifting characteristic function with the data it was assembled from.
#[derive(Debug, Clone)]
pub struct LiftingChar {
    pub symbol: MultiAnalyticSymbol,
    /// `G_α` in Fock index order.
    pub generators: Vec<CMat>,
    /// Orthonormal basis of `𝓓_C` in `⊕ ℂ^{m_C}`.
    pub qc: CMat,
    /// Orthonormal basis of `𝓓_E` in `⊕ ℂ^m`.
    pub qe: CMat,
    /// Largest of `‖G_α(1 − P_{𝓓_E})‖` and `‖(1 − P_{𝓓_C})G_α‖`: how far the
    /// generator maps are from factoring through `𝓓_E` into `𝓓_C`.
    pub consistency: f64,
}

impl LiftingChar {
    /// `G_α ι_i h`: the coefficient at `α` of `Θ d_h^i` in `⊕ ℂ^{m_C}`.
    pub fn apply_generator(&self, idx: usize, slot: usize, h: &CVec) -> CVec {
        let m = h.len();
        self.generators[idx].columns(slot * m, m) * h
    }
}

fn symbol_from_generators(gens: &[CMat], d: usize, n: usize, qc: &CMat, right: &CMat) -> MultiAnalyticSymbol {
    let mut theta = MultiAnalyticSymbol::zero(d, n, right.ncols(), qc.ncols());
    for (k, g) in gens.iter().enumerate() {
        theta.coeffs[k] = qc.adjoint() * g * right;
    }
    theta
}

fn consistency(gens: &[CMat], qc: &CMat, qe: &CMat) -> f64 {
    let pe = eye(qe.nrows()) - qe * qe.adjoint();
    let pc = eye(qc.nrows()) - qc * qc.adjoint();
    gens.iter()
        .map(|g| op_norm(&(g * &pe)).max(op_norm(&(&pc * g))))
        .fold(0.0, f64::max)
}

/// `Θ_{C,E} : 𝓓_E → Γ_{≤N} ⊗ 𝓓_C`. Requires a reduced lifting unless
/// `allow_nonreduced` is set.
pub fn lifting_char(l: &Lifting, n: usize, allow_nonreduced: bool, tol: &Tolerances) -> Result<LiftingChar> {
    if !allow_nonreduced && !classify(l, tol)?.is_reduced {
        return Err(FockError::NotReduced);
    }
    let ld = l.defects(tol)?;
    let w = l.gamma_dstar(tol)?;
    let gens = generators(&l.a, &ld.c.dfull, &w, &l.b, n);
    let de = defects(&l.total(), tol)?;
    let qc = ld.c.defect.basis.clone();
    let qe = de.defect.basis.clone();
    let right = pinv(&de.dfull, tol.rank)? * &qe;
    let symbol = symbol_from_generators(&gens, l.d(), n, &qc, &right);
    let consistency = consistency(&gens, &qc, &qe);
    Ok(LiftingChar {
        symbol,
        generators: gens,
        qc,
        qe,
        consistency,
    })
}

/// Orthonormal basis of `ω̄^⊥ ⊂ ℂ^d` by Gram–Schmidt on `e_i − ⟨ω̄, e_i⟩ω̄`.
pub fn omega_defect_basis(omega: &[C64]) -> CMat {
    let d = omega.len();
    let wbar = CVec::from_iterator(d, omega.iter().map(|z| z.conj()));
    let mut cols: Vec<CVec> = Vec::new();
    for i in 0..d {
        let mut v = -&wbar * omega[i];
        v[i] += C64::new(1.0, 0.0);
        for q in &cols {
            let proj = q.dotc(&v);
            v -= q * proj;
        }
        let nv = v.norm();
        if nv > 1e-10 {
            cols.push(v / C64::new(nv, 0.0));
        }
    }
    let mut out = zeros(d, cols.len());
    for (k, c) in cols.iter().enumerate() {
        out.set_column(k, c);
    }
    out
}

/// The extended characteristic function together with the rotated lifting
/// `U^*AU = [[ω, 0], [ℓ, Å]]` it is computed from.
#[derive(Debug, Clone)]
pub struct ExtendedChar {
    /// `θ̂_A : 𝓓_A → Γ_{≤N} ⊗ 𝓓_ω`.
    pub symbol: MultiAnalyticSymbol,
    /// Generator maps in the original coordinates of `A`
    /// (`d × d·dim`, slot-major).
    pub generators: Vec<CMat>,
    /// Generator maps in the rotated coordinates (`Ω` first in each slot).
    pub rotated_generators: Vec<CMat>,
    /// Basis of `𝓓_ω`.
    pub qw: CMat,
    /// Basis of `𝓓_A`.
    pub qa: CMat,
    pub lifting: Lifting,
    pub frame: EigenFrame,
    pub unitary: CMat,
    pub consistency: f64,
}

/// Builds the rotated lifting `[[ω, 0], [Q^†ℓ, Å]]` of an ergodic
/// coisometric tuple.
pub fn frame_lifting(a: &OperatorTuple, frame: &EigenFrame, tol: &Tolerances) -> Result<(Lifting, CMat)> {
    let (ring, q) = restrict_off_omega(a, frame, tol)?;
    let c = OperatorTuple {
        mats: frame.omega.iter().map(|&w| CMat::from_element(1, 1, w)).collect(),
    };
    let b: Vec<CMat> = frame
        .ells
        .iter()
        .map(|l| {
            let v = q.adjoint() * l;
            CMat::from_column_slice(v.len(), 1, v.as_slice())
        })
        .collect();
    let l = Lifting::from_blocks(c, ring, b, tol)?;
    Ok((l, frame_unitary(frame)))
}

pub fn extended_char(a: &OperatorTuple, frame: Option<&EigenFrame>, n: usize, tol: &Tolerances) -> Result<ExtendedChar> {
    if !is_coisometric(a, tol.tol.max(1e-8)) {
        return Err(FockError::NoInvariantVectorState);
    }
    if !is_ergodic(a, tol)? {
        return Err(FockError::NotErgodic);
    }
    let frame = match frame {
        Some(f) => f.clone(),
        None => eigen_frame(a, None, tol)?,
    };
    let (lift, u) = frame_lifting(a, &frame, tol)?;
    let (d, m) = (a.d(), a.dim());
    let qw = omega_defect_basis(&frame.omega);
    let ld = lift.defects(tol)?;
    let w = lift.gamma_dstar(tol)?;
    let rotated = generators(&lift.a, &ld.c.dfull, &w, &lift.b, n);
    let back = kron(&eye(d), &u.adjoint());
    let gens: Vec<CMat> = rotated.iter().map(|g| g * &back).collect();
    let da = defects(a, tol)?;
    let qa = da.defect.basis.clone();
    let right = pinv(&da.dfull, tol.rank)? * &qa;
    let symbol = symbol_from_generators(&gens, d, n, &qw, &right);
    let consistency = consistency(&gens, &qw, &qa);
    debug_assert_eq!(gens[0].ncols(), d * m);
    Ok(ExtendedChar {
        symbol,
        generators: gens,
        rotated_generators: rotated,
        qw,
        qa,
        lifting: lift,
        frame,
        unitary: u,
        consistency,
    })
}

/// Largest deviation between the `𝓗̊` columns of the extended generator
/// maps and `γ` applied to the generator-level Popescu coefficients of `Å`,
/// with `γ = D̂_* D_{*,Å}^+`.
pub fn case_two_splitting_residual(ext: &ExtendedChar, tol: &Tolerances) -> Result<f64> {
    let ring = &ext.lifting.a;
    let d = ring.d();
    let mr = ring.dim();
    if mr == 0 {
        return Ok(0.0);
    }
    let m = mr + 1;
    let pop = popescu_generators(ring, ext.symbol.n, tol)?;
    let dring = defects(ring, tol)?;
    // D̂_* h = Σ ⟨ℓ_i, h⟩ ε_i in Ω^⊥ coordinates
    let mut dhat = zeros(d, mr);
    for (i, bi) in ext.lifting.b.iter().enumerate() {
        dhat.set_row(i, &bi.adjoint().row(0));
    }
    let gamma = &dhat * pinv(&dring.dstar, tol.rank)?;
    let mut worst: f64 = 0.0;
    for (g, p) in ext.rotated_generators.iter().zip(&pop) {
        let mut case2 = zeros(d, d * mr);
        for i in 0..d {
            case2
                .view_mut((0, i * mr), (d, mr))
                .copy_from(&g.columns(i * m + 1, mr));
        }
        worst = worst.max(op_norm(&(case2 - &gamma * p)));
    }
    Ok(worst)
}

/// Compression of `M_{C,E}` to `Γ_J ⊗ 𝓓_C` and `Γ_J ⊗ 𝓓_E`.
#[derive(Debug, Clone)]
pub struct ConstrainedChar {
    pub matrix: CMat,
    pub fock_basis: SubspaceBasis,
    pub base: LiftingChar,
    /// Worst residual of the constraint polynomials on `E`.
    pub constraint_residual: f64,
}

/// `M_{J,C,E} = P_{Γ_J ⊗ 𝓓_C} M_{C,E}|_{Γ_J ⊗ 𝓓_E}`. With `checked`, the
/// lifting must satisfy the constraints within `tol.tol`.
pub fn constrained_char(
    l: &Lifting,
    j: &ConstraintSet,
    n: usize,
    checked: bool,
    allow_nonreduced: bool,
    tol: &Tolerances,
) -> Result<ConstrainedChar> {
    let res = constraint_residual(&l.total(), j)?;
    if checked && res > tol.tol.max(1e-9) {
        return Err(FockError::NotConstrained { residual: res });
    }
    let base = lifting_char(l, n, allow_nonreduced, tol)?;
    let f = TruncatedFock::new(l.d(), n);
    let gj = constrained_fock(&f, j, tol.rank)?;
    let (rc, re) = (base.symbol.cod_dim, base.symbol.dom_dim);
    let m = extend(&base.symbol, n);
    let pc = kron(&gj.basis, &eye(rc));
    let pe = kron(&gj.basis, &eye(re));
    let matrix = pc.adjoint() * m * pe;
    Ok(ConstrainedChar {
        matrix,
        fock_basis: gj,
        base,
        constraint_residual: res,
    })
}

/// `M_0 : 𝓗_A → Γ_{≤N} ⊗ 𝓓_C`, `h ↦ Σ_α e_α ⊗ γD_{*,A}A_α^*h`.
pub fn m0_matrix(l: &Lifting, n: usize, tol: &Tolerances) -> Result<CMat> {
    let ld = l.defects(tol)?;
    let w = l.gamma_dstar(tol)?;
    let qc = &ld.c.defect.basis;
    let blocks: Vec<CMat> = word_blocks(&l.a, &w, n).iter().map(|p| qc.adjoint() * p).collect();
    let refs: Vec<&CMat> = blocks.iter().collect();
    Ok(crate::numkit::vstack(&refs))
}

/// `‖M_0M_0^† + M M^† − 1‖` on `Γ_{≤N} ⊗ 𝓓_C`.
pub fn unitarity_residual(l: &Lifting, n: usize, allow_nonreduced: bool, tol: &Tolerances) -> Result<f64> {
    let theta = lifting_char(l, n, allow_nonreduced, tol)?;
    let m = extend(&theta.symbol, n);
    let m0 = m0_matrix(l, n, tol)?;
    let s = &m0 * m0.adjoint() + &m * m.adjoint();
    Ok(op_norm(&(s - eye(m.nrows()))))
}

/// The same identity compressed to `Γ_J ⊗ 𝓓_C`:
/// `‖M_0^J(M_0^J)^† + M_J M_J^† − 1‖` with `M_0^J = P_J M_0`.
pub fn constrained_unitarity_residual(
    l: &Lifting,
    j: &ConstraintSet,
    n: usize,
    checked: bool,
    allow_nonreduced: bool,
    tol: &Tolerances,
) -> Result<f64> {
    let cc = constrained_char(l, j, n, checked, allow_nonreduced, tol)?;
    let rc = cc.base.symbol.cod_dim;
    let pc = kron(&cc.fock_basis.basis, &eye(rc));
    let m0j = pc.adjoint() * m0_matrix(l, n, tol)?;
    let s = &m0j * m0j.adjoint() + &cc.matrix * cc.matrix.adjoint();
    Ok(op_norm(&(s - eye(cc.matrix.nrows()))))
}

/// Lifting built from a contractive symbol `θ̃ : 𝓓 → Γ ⊗ 𝓓_C`, together with
/// the embedding of `𝓗_A` into the model space.
#[derive(Debug, Clone)]
pub struct FunctionalModel {
    pub lifting: Lifting,
    /// Orthonormal basis of `𝓗_C ⊕ 𝓗_A` inside the model space
    /// `ℂ^{m_C} ⊕ (Γ_{≤N} ⊗ 𝓓_C) ⊕ (Γ_{≤N'} ⊗ 𝓓)`.
    pub basis: CMat,
    /// `N' = N − deg θ̃`, the top level on which the model is exact.
    pub valid_levels: usize,
}

/// Model lifting: `Ṽ = V^C ⊕ Y` on `𝓗_C ⊕ (Γ ⊗ 𝓓_C) ⊕ \overline{range Δ}`
/// with `Y_iΔx = Δ(L_i ⊗ 1)x`, `𝓗_A` the part of the complement of
/// `{0 ⊕ M̃x ⊕ Δx}` coinvariant under `Ṽ^*`, and `E_i^* = Ṽ_i^*` restricted.
pub fn functional_model(c: &OperatorTuple, theta: &MultiAnalyticSymbol, n: usize, tol: &Tolerances) -> Result<FunctionalModel> {
    let dc = defects(c, tol)?;
    let (d, m_c, r_c) = (c.d(), c.dim(), dc.defect.dim());
    if theta.d != d || theta.cod_dim != r_c {
        return Err(FockError::DimensionMismatch(format!(
            "symbol maps into Γ ⊗ C^{} with d = {}, expected 𝓓_C of dimension {r_c} with d = {d}",
            theta.cod_dim, theta.d
        )));
    }
    let deg = theta.effective_degree(tol.tol);
    if n < 2 * deg {
        return Err(FockError::BufferTooSmall { needed: 2 * deg, got: n });
    }
    let n_x = n - deg;
    let p = theta.dom_dim;
    let f = TruncatedFock::new(d, n);
    let fx = TruncatedFock::new(d, n_x);
    let nx = fx.total_dim() * p;
    let nf = f.total_dim() * r_c;
    let mfull = extend(theta, n);
    let mt = mfull.columns(0, nx).into_owned();
    let norm = op_norm(&mt);
    if norm > 1.0 + tol.tol.max(1e-8) {
        return Err(FockError::NotContraction { norm });
    }
    let delta = psqrt(&(eye(nx) - mt.adjoint() * &mt), tol.tol.max(1e-9))?;
    let dpinv = pinv(&delta, tol.rank)?;

    let sq = crate::dilation::mid(c, n, tol)?.square();
    let total = m_c + nf + nx;
    let ops: Vec<CMat> = (0..d)
        .map(|i| {
            let li = creation_tensor(d, n_x, p, i + 1);
            let y_star = &dpinv * li.adjoint() * &delta;
            block_diag(&[&sq.mats[i].adjoint(), &y_star])
        })
        .collect();

    // W̃x = (0, M̃x, Δx)
    let mut wt = zeros(total, nx);
    wt.view_mut((m_c, 0), (nf, nx)).copy_from(&mt);
    wt.view_mut((m_c + nf, 0), (nx, nx)).copy_from(&delta);

    // candidate: 𝓗_C ⊕ (Fock levels ≤ N') ⊕ range Δ, orthogonal to W̃
    let range_delta = crate::numkit::range_basis(&delta, tol.rank)?;
    let nfx = fx.total_dim() * r_c;
    let zdim = m_c + nfx + range_delta.dim();
    let mut z = zeros(total, zdim);
    for k in 0..m_c + nfx {
        z[(k, k)] = C64::new(1.0, 0.0);
    }
    z.view_mut((m_c + nf, m_c + nfx), (nx, range_delta.dim()))
        .copy_from(&range_delta.basis);
    let mut hc = zeros(total, m_c);
    for k in 0..m_c {
        hc[(k, k)] = C64::new(1.0, 0.0);
    }
    let perp_z = null_space(&(wt.adjoint() * &z), tol.rank)?;
    let cand = orthonormalize(&hstack(&[&hc, &(&z * perp_z)]), tol.rank)?;
    let inv = largest_coinvariant_in(&SubspaceBasis::from_orthonormal(cand), &ops, tol.rank.max(1e-8))?;
    let hcs = SubspaceBasis::from_orthonormal(hc.clone());
    let lost = inv.containment_residual(&hcs);
    if lost > 1e-6 {
        return Err(FockError::NotInvariant { residual: lost });
    }
    // 𝓗_A = inv ⊖ 𝓗_C
    let mut ha = inv.basis.clone();
    ha.rows_mut(0, m_c).fill(C64::new(0.0, 0.0));
    let ha = orthonormalize(&ha, tol.rank)?;
    let m_a = ha.ncols();
    let basis = hstack(&[&hc, &ha]);
    let mut a_mats = Vec::with_capacity(d);
    let mut b_mats = Vec::with_capacity(d);
    for op in &ops {
        let e = (basis.adjoint() * op * &basis).adjoint();
        a_mats.push(e.view((m_c, m_c), (m_a, m_a)).into_owned());
        b_mats.push(e.view((m_c, 0), (m_a, m_c)).into_owned());
    }
    let lifting = Lifting::from_blocks(c.clone(), OperatorTuple { mats: a_mats }, b_mats, tol)?;
    Ok(FunctionalModel {
        lifting,
        basis,
        valid_levels: n_x,
    })
}

/// Result of `k` steps of the cocycle product applied to `𝓗`.
#[derive(Debug, Clone)]
pub struct CocycleProduct {
    /// Fock part `Σ_{|α|<k} e_α ⊗ D_*T_α^*`, a map `𝓗 → Γ_{≤N} ⊗ 𝓓_*`
    /// (levels `k..N` are zero).
    pub fock_part: CMat,
    /// `‖Σ_{|α|=k} T_αT_α^*‖`: squared norm bound of the part still in
    /// `𝓗 ⊗ (ℂ^d)^{⊗k}`.
    pub remainder_norm: f64,
    pub k: usize,
}

/// Applies `R_{k−1}^* … R_0^*` to `𝓗`, where `R_j^*` sends the
/// `𝓗 ⊗ (ℂ^d)^{⊗j}` component `x_α` to `e_α ⊗ D_*x_α` plus the components
/// `x_{αi} = T_i^*x_α`.
pub fn cocycle_product(t: &OperatorTuple, k: usize, n: usize, tol: &Tolerances) -> Result<CocycleProduct> {
    if k > n + 1 {
        return Err(FockError::BufferTooSmall { needed: k, got: n + 1 });
    }
    let dd = defects(t, tol)?;
    let (h, d) = (t.dim(), t.d());
    let qs = dd.defect_star.basis.adjoint() * &dd.dstar;
    let rs = qs.nrows();
    let f = TruncatedFock::new(d, n);
    let mut fock_part = zeros(f.total_dim() * rs, h);
    let adj = t.adjoints();
    let mut level: Vec<CMat> = vec![eye(h)];
    for j in 0..k {
        let start = f.dim_below(j);
        for (lex, x) in level.iter().enumerate() {
            fock_part
                .view_mut(((start + lex) * rs, 0), (rs, h))
                .copy_from(&(&qs * x));
        }
        let mut next = Vec::with_capacity(level.len() * d);
        for x in &level {
            for ti in &adj {
                next.push(ti * x);
            }
        }
        level = next;
    }
    let rem = level.iter().fold(zeros(h, h), |acc, x| acc + x.adjoint() * x);
    Ok(CocycleProduct {
        fock_part,
        remainder_norm: op_norm(&rem),
        k,
    })
}

/// Dense oracle for [`cocycle_product`]: builds each `R_j^*` as an explicit
/// matrix on `(Γ_{≤N} ⊗ 𝓓_*) ⊕ 𝓗 ⊗ (ℂ^d)^{⊗j}` and multiplies them out.
/// Returns the Fock part and the remaining `𝓗 ⊗ (ℂ^d)^{⊗k}` part.
pub fn cocycle_product_dense(t: &OperatorTuple, k: usize, n: usize, tol: &Tolerances) -> Result<(CMat, CMat)> {
    if k > n + 1 {
        return Err(FockError::BufferTooSmall { needed: k, got: n + 1 });
    }
    let dd = defects(t, tol)?;
    let (h, d) = (t.dim(), t.d());
    let qs = dd.defect_star.basis.adjoint() * &dd.dstar;
    let rs = qs.nrows();
    let f = TruncatedFock::new(d, n);
    let nf = f.total_dim() * rs;
    // state after 0 steps: 0 ⊕ h
    let mut state = zeros(nf + h, h);
    state.view_mut((nf, 0), (h, h)).copy_from(&eye(h));
    for j in 0..k {
        let width = d.pow(j as u32);
        let mut r = zeros(nf + h * width * d, nf + h * width);
        r.view_mut((0, 0), (nf, nf)).copy_from(&eye(nf));
        let start = f.dim_below(j);
        for a in 0..width {
            let col = nf + a * h;
            r.view_mut(((start + a) * rs, col), (rs, h)).copy_from(&qs);
            for i in 0..d {
                let row = nf + (a * d + i) * h;
                r.view_mut((row, col), (h, h)).copy_from(&t.mats[i].adjoint());
            }
        }
        state = r * state;
    }
    let fock = state.rows(0, nf).into_owned();
    let rest = state.rows(nf, state.nrows() - nf).into_owned();
    Ok((fock, rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Word;
    use crate::numkit::{from_real_rows, max_abs, r};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn scalar(x: f64) -> OperatorTuple {
        OperatorTuple::new(vec![from_real_rows(1, 1, &[x])]).unwrap()
    }

    #[test]
    fn popescu_scalar_examples() {
        let th = popescu_char(&scalar(0.0), 4, &tol()).unwrap();
        assert!(th.coeffs[0].norm() < 1e-15);
        assert!((th.coeffs[1][(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert!(th.coeffs[2..].iter().all(|c| c.norm() < 1e-15));

        let lam = 0.4;
        let th = popescu_char(&scalar(lam), 6, &tol()).unwrap();
        assert!((th.coeffs[0][(0, 0)] - r(-lam)).norm() < 1e-14);
        for k in 1..=6 {
            let expect = (1.0 - lam * lam) * lam.powi(k - 1);
            assert!((th.coeffs[k as usize][(0, 0)] - r(expect)).norm() < 1e-14);
        }
    }

    #[test]
    fn popescu_generators_match_symbol() {
        let t = OperatorTuple::new(vec![
            from_real_rows(2, 2, &[0.1, 0.4, 0.0, 0.3]),
            from_real_rows(2, 2, &[0.2, 0.0, 0.5, 0.1]),
        ])
        .unwrap();
        let th = popescu_char(&t, 3, &tol()).unwrap();
        let g = popescu_generators(&t, 3, &tol()).unwrap();
        let dd = defects(&t, &tol()).unwrap();
        for (c, gk) in th.coeffs.iter().zip(&g) {
            let via = dd.defect_star.basis.adjoint() * gk;
            let direct = c * dd.defect.basis.adjoint() * &dd.dfull;
            assert!(max_abs(&(via - direct)) < 1e-12);
        }
    }

    fn two_level_shift() -> Lifting {
        // C = 0 on C, A = 0 on C, γ = 1: E is the 2x2 nilpotent shift
        Lifting::from_blocks(scalar(0.0), scalar(0.0), vec![from_real_rows(1, 1, &[1.0])], &tol()).unwrap()
    }

    #[test]
    fn lifting_char_of_shift_pair() {
        let l = two_level_shift();
        let th = lifting_char(&l, 3, true, &tol()).unwrap();
        assert_eq!((th.symbol.dom_dim, th.symbol.cod_dim), (1, 1));
        assert!(th.symbol.coeffs[0].norm() < 1e-14);
        assert!((th.symbol.coeffs[1][(0, 0)].norm() - 1.0).abs() < 1e-14);
        assert!(th.symbol.coeffs[2..].iter().all(|c| c.norm() < 1e-14));
        assert!(th.consistency < 1e-12);
    }

    #[test]
    fn direct_sum_has_defect_embedding() {
        // γ = 0: Θ is the inclusion of 𝓓_C into 𝓓_E at e_0 on the C-part
        let l = Lifting::direct_sum(scalar(0.5), scalar(0.3), &tol()).unwrap();
        let th = lifting_char(&l, 2, true, &tol()).unwrap();
        assert!(th.symbol.coeffs[1..].iter().all(|c| c.norm() < 1e-14));
        let gd = crate::symbols::gram_defect(&th.symbol, 1e-10);
        assert!(op_norm(&(&th.symbol.coeffs[0] * th.symbol.coeffs[0].adjoint() - eye(1))) < 1e-12);
        assert!(gd.max_cross < 1e-12);
    }

    #[test]
    fn omega_basis_is_orthonormal_complement() {
        let s = 1.0 / 2f64.sqrt();
        let om = [r(s), r(s)];
        let q = omega_defect_basis(&om);
        assert_eq!(q.ncols(), 1);
        assert!((q[(0, 0)] - r(s)).norm() < 1e-14 && (q[(1, 0)] + r(s)).norm() < 1e-14);
    }

    #[test]
    fn cocycle_trivial_tuple() {
        let t = OperatorTuple::zero(2, 2);
        let cp = cocycle_product(&t, 1, 3, &tol()).unwrap();
        let k = crate::dilation::poisson_kernel(&t, 3, &tol()).unwrap();
        assert!(max_abs(&(cp.fock_part - k)) < 1e-15);
        assert!(cp.remainder_norm < 1e-15);
        assert!(matches!(cocycle_product(&t, 5, 3, &tol()), Err(FockError::BufferTooSmall { .. })));
    }

    #[test]
    fn cocycle_scalar_tail_bound() {
        let lam: f64 = 0.7;
        let t = scalar(lam);
        let cp = cocycle_product(&t, 12, 12, &tol()).unwrap();
        let k = crate::dilation::poisson_kernel(&t, 12, &tol()).unwrap();
        assert!(op_norm(&(&cp.fock_part - &k)) <= lam.powi(12));
        let (fock, rest) = cocycle_product_dense(&t, 12, 12, &tol()).unwrap();
        assert!(max_abs(&(fock - cp.fock_part)) < 1e-14);
        assert!((op_norm(&rest).powi(2) - cp.remainder_norm).abs() < 1e-14);
    }

    #[test]
    fn word_indices_in_cocycle_match_fock_order() {
        let t = OperatorTuple::new(vec![
            from_real_rows(2, 2, &[0.1, 0.4, 0.0, 0.3]),
            from_real_rows(2, 2, &[0.2, 0.0, 0.5, 0.1]),
        ])
        .unwrap();
        let cp = cocycle_product(&t, 3, 3, &tol()).unwrap();
        let (fock, _) = cocycle_product_dense(&t, 3, 3, &tol()).unwrap();
        assert!(max_abs(&(&fock - &cp.fock_part)) < 1e-14);
        let k = crate::dilation::poisson_kernel(&t, 3, &tol()).unwrap();
        let f = TruncatedFock::new(2, 3);
        let rs = k.nrows() / f.total_dim();
        let below = f.dim_below(3) * rs;
        assert!(max_abs(&(cp.fock_part.rows(0, below) - k.rows(0, below))) < 1e-14);
        let w = Word::new(&[2, 1]);
        assert!(f.index(&w) < f.dim_below(3));
    }
}
