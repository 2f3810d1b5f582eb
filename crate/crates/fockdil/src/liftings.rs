//! Liftings `E_i = [[C_i, 0], [B_i, A_i]]` of a row contraction `C`, the
//! contraction `γ` with `B^* = D_C γ D_{*,A}`, and the classification
//! predicates (coisometric, subisometric, resolving, reduced).

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{FockError, Result};
use crate::numkit::{
    eye, fro_norm, largest_coinvariant_in, null_space, op_norm, pinv, vstack, zeros, CMat,
    SubspaceBasis,
};
use crate::tuples::{self, defects, DefectData, OperatorTuple};

/// A lifting of `C` (on `ℂ^{m_C}`) by `A` (on `ℂ^{m_A}`).
#[derive(Debug, Clone)]
pub struct Lifting {
    pub c: OperatorTuple,
    pub a: OperatorTuple,
    /// `B_i : ℂ^{m_C} → ℂ^{m_A}`.
    pub b: Vec<CMat>,
    /// `γ` in defect coordinates: `dim 𝓓_C × dim 𝓓_{*,A}`.
    pub gamma: CMat,
    /// `‖B^* − D_C Q_C γ Q_{*A}^† D_{*,A}‖_F` for the stored `γ`.
    pub gamma_residual: f64,
}

/// Defect data of both diagonal blocks.
#[derive(Debug, Clone)]
pub struct LiftingDefects {
    /// Defect data of `C` (`D_C` is the operator `D` of `C`).
    pub c: DefectData,
    /// `D_{*,A}`.
    pub dstar_a: CMat,
    /// Orthonormal basis of `𝓓_{*,A}`.
    pub qstar_a: SubspaceBasis,
}

fn a_defect_star(a: &OperatorTuple, tol: &Tolerances) -> Result<(CMat, SubspaceBasis)> {
    if a.dim() == 0 {
        return Ok((zeros(0, 0), SubspaceBasis::zero(0)));
    }
    let dd = defects(a, tol)?;
    Ok((dd.dstar, dd.defect_star))
}

pub fn lifting_defects(c: &OperatorTuple, a: &OperatorTuple, tol: &Tolerances) -> Result<LiftingDefects> {
    let cd = defects(c, tol)?;
    let (dstar_a, qstar_a) = a_defect_star(a, tol)?;
    Ok(LiftingDefects {
        c: cd,
        dstar_a,
        qstar_a,
    })
}

fn check_shapes(c: &OperatorTuple, a: &OperatorTuple, b: &[CMat]) -> Result<()> {
    if c.d() != a.d() || b.len() != c.d() {
        return Err(FockError::DimensionMismatch(format!(
            "C has {} operators, A has {}, B has {}",
            c.d(),
            a.d(),
            b.len()
        )));
    }
    for (i, bi) in b.iter().enumerate() {
        if bi.shape() != (a.dim(), c.dim()) {
            return Err(FockError::DimensionMismatch(format!(
                "B_{} is {}x{}, expected {}x{}",
                i + 1,
                bi.nrows(),
                bi.ncols(),
                a.dim(),
                c.dim()
            )));
        }
    }
    Ok(())
}

/// `(B_1^*; …; B_d^*)`, of size `d·m_C × m_A`.
pub fn b_star_stack(b: &[CMat]) -> CMat {
    let adj: Vec<CMat> = b.iter().map(|m| m.adjoint()).collect();
    let refs: Vec<&CMat> = adj.iter().collect();
    vstack(&refs)
}

fn split_b_star(bs: &CMat, d: usize, m_c: usize) -> Vec<CMat> {
    (0..d)
        .map(|i| bs.rows(i * m_c, m_c).adjoint())
        .collect()
}

/// `E_i = [[C_i, 0], [B_i, A_i]]`.
pub fn assemble(c: &OperatorTuple, a: &OperatorTuple, b: &[CMat]) -> OperatorTuple {
    let (mc, ma) = (c.dim(), a.dim());
    let mats = (0..c.d())
        .map(|i| {
            let mut e = zeros(mc + ma, mc + ma);
            e.view_mut((0, 0), (mc, mc)).copy_from(&c.mats[i]);
            if ma > 0 {
                e.view_mut((mc, 0), (ma, mc)).copy_from(&b[i]);
                e.view_mut((mc, mc), (ma, ma)).copy_from(&a.mats[i]);
            }
            e
        })
        .collect();
    OperatorTuple { mats }
}

impl Lifting {
    pub fn d(&self) -> usize {
        self.c.d()
    }

    pub fn dim_c(&self) -> usize {
        self.c.dim()
    }

    pub fn dim_a(&self) -> usize {
        self.a.dim()
    }

    pub fn dim(&self) -> usize {
        self.dim_c() + self.dim_a()
    }

    pub fn total(&self) -> OperatorTuple {
        assemble(&self.c, &self.a, &self.b)
    }

    pub fn defects(&self, tol: &Tolerances) -> Result<LiftingDefects> {
        lifting_defects(&self.c, &self.a, tol)
    }

    /// `γ D_{*,A}` as a map `ℂ^{m_A} → ℂ^{d·m_C}` in ambient coordinates.
    pub fn gamma_dstar(&self, tol: &Tolerances) -> Result<CMat> {
        let ld = self.defects(tol)?;
        Ok(&ld.c.defect.basis * &self.gamma * ld.qstar_a.basis.adjoint() * &ld.dstar_a)
    }

    /// Builds a lifting from its blocks, recovering `γ`.
    pub fn from_blocks(c: OperatorTuple, a: OperatorTuple, b: Vec<CMat>, tol: &Tolerances) -> Result<Self> {
        check_shapes(&c, &a, &b)?;
        let e = assemble(&c, &a, &b);
        let norm = op_norm(&e.row_gram());
        if norm > 1.0 + tol.tol {
            return Err(FockError::NotContraction { norm });
        }
        let (gamma, gamma_residual) = recover_gamma(&c, &a, &b, tol)?;
        Ok(Lifting {
            c,
            a,
            b,
            gamma,
            gamma_residual,
        })
    }

    /// `E = C ⊕ A` with `γ = 0`.
    pub fn direct_sum(c: OperatorTuple, a: OperatorTuple, tol: &Tolerances) -> Result<Self> {
        let b = vec![zeros(a.dim(), c.dim()); c.d()];
        Self::from_blocks(c, a, b, tol)
    }

    /// Conjugates the `𝓗_A` block by a unitary `u`: `A ↦ u^*Au`, `B ↦ u^*B`.
    pub fn rotate_a(&self, u: &CMat, tol: &Tolerances) -> Result<Self> {
        let a = self.a.conjugate(u);
        let b = self.b.iter().map(|m| u.adjoint() * m).collect();
        Self::from_blocks(self.c.clone(), a, b, tol)
    }
}

/// Builds the lifting with `B^* = D_C Q_C γ Q_{*A}^† D_{*,A}`.
pub fn lift_from_gamma(c: &OperatorTuple, a: &OperatorTuple, gamma: &CMat, tol: &Tolerances) -> Result<Lifting> {
    if c.d() != a.d() {
        return Err(FockError::DimensionMismatch(format!(
            "C has {} operators, A has {}",
            c.d(),
            a.d()
        )));
    }
    let ld = lifting_defects(c, a, tol)?;
    let (rc, ra) = (ld.c.defect.dim(), ld.qstar_a.dim());
    if gamma.shape() != (rc, ra) {
        return Err(FockError::DimensionMismatch(format!(
            "gamma is {}x{}, expected dim 𝓓_C x dim 𝓓_*A = {rc}x{ra}",
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    let g = op_norm(gamma);
    if g > 1.0 + tol.tol {
        return Err(FockError::NotContraction { norm: g });
    }
    let bs = &ld.c.dfull * &ld.c.defect.basis * gamma * ld.qstar_a.basis.adjoint() * &ld.dstar_a;
    let b = split_b_star(&bs, c.d(), c.dim());
    let e = assemble(c, a, &b);
    let norm = op_norm(&e.row_gram());
    if norm > 1.0 + tol.tol {
        return Err(FockError::NotContraction { norm });
    }
    Ok(Lifting {
        c: c.clone(),
        a: a.clone(),
        b,
        gamma: gamma.clone(),
        gamma_residual: 0.0,
    })
}

/// Least-squares `γ` with `B^* ≈ D_C Q_C γ Q_{*A}^† D_{*,A}`, and its residual.
pub fn recover_gamma(c: &OperatorTuple, a: &OperatorTuple, b: &[CMat], tol: &Tolerances) -> Result<(CMat, f64)> {
    check_shapes(c, a, b)?;
    let ld = lifting_defects(c, a, tol)?;
    let qc = &ld.c.defect.basis;
    let qa = &ld.qstar_a.basis;
    if a.dim() == 0 {
        return Ok((zeros(qc.ncols(), 0), 0.0));
    }
    let bs = b_star_stack(b);
    let x = qc.adjoint() * pinv(&ld.c.dfull, tol.rank)? * &bs * pinv(&ld.dstar_a, tol.rank)? * qa;
    let recon = &ld.c.dfull * qc * &x * qa.adjoint() * &ld.dstar_a;
    let residual = fro_norm(&(&bs - recon));
    let scale = fro_norm(&bs);
    if residual > tol.fit * scale + 1e-12 {
        return Err(FockError::InconsistentLifting { residual });
    }
    let g = op_norm(&x);
    if g > 1.0 + 1e-8 {
        return Err(FockError::NotContraction { norm: g });
    }
    Ok((x, residual))
}

/// Whether an isometric `γ` can exist, i.e. `dim 𝓓_{*,A} ≤ dim 𝓓_C`.
pub fn isometric_gamma_possible(c: &OperatorTuple, a: &OperatorTuple, tol: &Tolerances) -> Result<bool> {
    let ld = lifting_defects(c, a, tol)?;
    Ok(ld.qstar_a.dim() <= ld.c.defect.dim())
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub gamma_isometric: bool,
    pub is_coisometric_lifting: bool,
    pub a_star_stable: bool,
    pub a_cnc: bool,
    pub is_subisometric: bool,
    pub is_resolving: bool,
    pub is_reduced: bool,
    /// Dimension of the largest `A^*`-coinvariant subspace of `ker γD_{*,A}`.
    pub kernel_piece_dim: usize,
    /// Dimension of `𝓗¹_A`.
    pub h1_dim: usize,
}

pub fn classify(l: &Lifting, tol: &Tolerances) -> Result<Classification> {
    let ma = l.dim_a();
    let gamma_isometric = if l.gamma.ncols() == 0 {
        true
    } else {
        op_norm(&(l.gamma.adjoint() * &l.gamma - eye(l.gamma.ncols()))) < tol.tol.max(1e-8)
    };
    let is_coisometric_lifting = tuples::is_coisometric(&l.total(), tol.tol.max(1e-8));
    if ma == 0 {
        return Ok(Classification {
            gamma_isometric,
            is_coisometric_lifting,
            a_star_stable: true,
            a_cnc: true,
            is_subisometric: gamma_isometric,
            is_resolving: true,
            is_reduced: true,
            kernel_piece_dim: 0,
            h1_dim: 0,
        });
    }
    let st = tuples::stability_report(&l.a, tol)?;
    let w = l.gamma_dstar(tol)?;
    let ker = SubspaceBasis::from_orthonormal(null_space(&w, tol.rank.max(1e-8))?);
    let piece = largest_coinvariant_in(&ker, &l.a.adjoints(), tol.rank.max(1e-8))?;
    let is_resolving = st.h1.containment_residual(&piece) < 1e-6;
    Ok(Classification {
        gamma_isometric,
        is_coisometric_lifting,
        a_star_stable: st.star_stable,
        a_cnc: st.cnc,
        is_subisometric: st.star_stable && gamma_isometric,
        is_resolving,
        is_reduced: st.cnc && is_resolving,
        kernel_piece_dim: piece.dim(),
        h1_dim: st.h1.dim(),
    })
}

/// Combines a lifting `E` of `C` by `A` with a lifting `Ẽ` of `E` by `Ã` into
/// the lifting of `C` by `[[A, 0], [*, Ã]]`.
pub fn stack(l1: &Lifting, l2: &Lifting, tol: &Tolerances) -> Result<Lifting> {
    let e = l1.total();
    if l2.c.d() != e.d() || l2.c.dim() != e.dim() {
        return Err(FockError::DimensionMismatch("second lifting is not over the first".into()));
    }
    let diff = l2
        .c
        .mats
        .iter()
        .zip(&e.mats)
        .map(|(x, y)| op_norm(&(x - y)))
        .fold(0.0, f64::max);
    if diff > tol.tol.max(1e-9) {
        return Err(FockError::DimensionMismatch(format!(
            "base of the second lifting differs from the first lifting by {diff:e}"
        )));
    }
    if l2.dim_a() == 0 {
        return Ok(l1.clone());
    }
    let (mc, ma, mt) = (l1.dim_c(), l1.dim_a(), l2.dim_a());
    let big = ma + mt;
    let mut a_mats = Vec::with_capacity(l1.d());
    let mut b_mats = Vec::with_capacity(l1.d());
    for i in 0..l1.d() {
        let mut am = zeros(big, big);
        if ma > 0 {
            am.view_mut((0, 0), (ma, ma)).copy_from(&l1.a.mats[i]);
            am.view_mut((ma, 0), (mt, ma)).copy_from(&l2.b[i].columns(mc, ma));
        }
        am.view_mut((ma, ma), (mt, mt)).copy_from(&l2.a.mats[i]);
        let mut bm = zeros(big, mc);
        if ma > 0 {
            bm.view_mut((0, 0), (ma, mc)).copy_from(&l1.b[i]);
        }
        bm.view_mut((ma, 0), (mt, mc)).copy_from(&l2.b[i].columns(0, mc));
        a_mats.push(am);
        b_mats.push(bm);
    }
    Lifting::from_blocks(l1.c.clone(), OperatorTuple { mats: a_mats }, b_mats, tol)
}
