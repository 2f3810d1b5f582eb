//! Minimal isometric dilation on `𝓗 ⊕ (Γ_{≤N} ⊗ 𝓓)`, Poisson kernel,
//! wandering subspaces and Beurling symbols of invariant subspaces, and the
//! pseudo-constrained dilation.

use crate::config::Tolerances;
use crate::error::{FockError, Result};
use crate::fock::{constrained_fock, creation_ops, maximal_constrained_piece, ConstraintSet, TruncatedFock};
use crate::numkit::{eye, op_norm, orthonormalize, zeros, CMat, SubspaceBasis, ONE};
use crate::sparse::{word_blocks, TupleAction};
use crate::symbols::{creation_tensor, MultiAnalyticSymbol};
use crate::tuples::{defects, DefectData, OperatorTuple};

/// Matrices of `V_i` from `𝓗 ⊕ Γ_{≤N}⊗𝓓` to `𝓗 ⊕ Γ_{≤N+1}⊗𝓓`, with `𝓓` in
/// the coordinates of `defect.defect`. Fock blocks are word-major:
/// coordinate `k` of word index `w` sits at `dim + w·r + k`.
#[derive(Debug, Clone)]
pub struct MidRealization {
    pub base: OperatorTuple,
    pub defect: DefectData,
    pub n: usize,
    pub v: Vec<CMat>,
}

impl MidRealization {
    pub fn dim_h(&self) -> usize {
        self.base.dim()
    }

    pub fn defect_dim(&self) -> usize {
        self.defect.defect.dim()
    }

    pub fn domain_dim(&self) -> usize {
        self.v[0].ncols()
    }

    /// `V_i` followed by the projection onto the domain; on its adjoint this
    /// loses nothing, since `V_i^*` only lowers Fock levels.
    pub fn square(&self) -> OperatorTuple {
        let n = self.domain_dim();
        OperatorTuple {
            mats: self.v.iter().map(|m| m.rows(0, n).into_owned()).collect(),
        }
    }

    /// `max_i,j ‖V_i^*V_j − δ_ij‖`.
    pub fn isometry_residual(&self) -> f64 {
        let n = self.domain_dim();
        let mut worst: f64 = 0.0;
        for i in 0..self.v.len() {
            for j in 0..self.v.len() {
                let g = self.v[i].adjoint() * &self.v[j];
                let target = if i == j { eye(n) } else { zeros(n, n) };
                worst = worst.max(op_norm(&(g - target)));
            }
        }
        worst
    }

    /// `max_{|α| ≤ len} ‖P_𝓗 V_α|_𝓗 − T_α‖`.
    pub fn dilation_residual(&self, len: usize) -> f64 {
        let sq = self.square();
        let h = self.dim_h();
        let mut worst: f64 = 0.0;
        let f = TruncatedFock::new(self.base.d(), len);
        for w in f.words() {
            let va = crate::fock::word_power(&sq, &w);
            let ta = crate::fock::word_power(&self.base, &w);
            worst = worst.max(op_norm(&(va.view((0, 0), (h, h)).into_owned() - ta)));
        }
        worst
    }
}

/// Dilation `V_i(h, d_α) = (T_ih, e_0 ⊗ D_ih + e_{iα} ⊗ d_α)`.
pub fn mid(t: &OperatorTuple, n: usize, tol: &Tolerances) -> Result<MidRealization> {
    let defect = defects(t, tol)?;
    let (h, rr, d) = (t.dim(), defect.defect.dim(), t.d());
    let f_dom = TruncatedFock::new(d, n);
    let f_tgt = TruncatedFock::new(d, n + 1);
    let dom = h + f_dom.total_dim() * rr;
    let tgt = h + f_tgt.total_dim() * rr;
    let mut v = Vec::with_capacity(d);
    for i in 0..d {
        let mut m = zeros(tgt, dom);
        m.view_mut((0, 0), (h, h)).copy_from(&t.mats[i]);
        m.view_mut((h, 0), (rr, h)).copy_from(&defect.slot_in_coords(i, h));
        for idx in 0..f_dom.total_dim() {
            let w = f_dom.word(idx);
            let to = f_tgt.index(&w.prepend(i as u8 + 1));
            for k in 0..rr {
                m[(h + to * rr + k, h + idx * rr + k)] = ONE;
            }
        }
        v.push(m);
    }
    Ok(MidRealization {
        base: t.clone(),
        defect,
        n,
        v,
    })
}

/// Poisson kernel `h ↦ Σ_{|α|≤N} e_α ⊗ D_* T_α^* h` with `𝓓_*` in the
/// coordinates of `defect_star`.
pub fn poisson_kernel(t: &OperatorTuple, n: usize, tol: &Tolerances) -> Result<CMat> {
    let dd = defects(t, tol)?;
    let x0 = dd.defect_star.basis.adjoint() * &dd.dstar;
    Ok(stack_blocks(&word_blocks(t, &x0, n)))
}

/// Poisson blocks for any tuple representation, starting from `x0 = Q_*^† D_*`.
pub fn poisson_blocks<A: TupleAction>(t: &A, x0: &CMat, n: usize) -> Vec<CMat> {
    word_blocks(t, x0, n)
}

pub fn stack_blocks(blocks: &[CMat]) -> CMat {
    let refs: Vec<&CMat> = blocks.iter().collect();
    crate::numkit::vstack(&refs)
}

fn check_invariant(m: &SubspaceBasis, d: usize, n: usize, u_dim: usize, tol: f64) -> Result<Vec<CMat>> {
    let comp = m.complement_projector();
    let mut images = Vec::with_capacity(d);
    let mut worst: f64 = 0.0;
    for i in 1..=d {
        let li = creation_tensor(d, n, u_dim, i);
        let img = &li * &m.basis;
        worst = worst.max(op_norm(&(&comp * &img)));
        images.push(img);
    }
    if worst > tol {
        return Err(FockError::NotInvariant { residual: worst });
    }
    Ok(images)
}

/// `𝓝 = M ⊖ span{(L_i ⊗ 1)M}` for `M ⊆ Γ_{≤N} ⊗ ℂ^{u_dim}` invariant under
/// the truncated creation operators.
pub fn wandering_subspace(m: &SubspaceBasis, u_dim: usize, d: usize, n: usize, tol: &Tolerances) -> Result<SubspaceBasis> {
    let expected = TruncatedFock::new(d, n).total_dim() * u_dim;
    if m.ambient_dim != expected {
        return Err(FockError::DimensionMismatch(format!(
            "subspace lives in C^{}, expected Γ_≤{n}(C^{d}) ⊗ C^{u_dim} of dimension {expected}",
            m.ambient_dim
        )));
    }
    if m.dim() == 0 {
        return Ok(SubspaceBasis::zero(expected));
    }
    let images = check_invariant(m, d, n, u_dim, tol.tol.max(1e-9))?;
    let refs: Vec<&CMat> = images.iter().collect();
    let moved = SubspaceBasis::span(&crate::numkit::hstack(&refs), tol.rank)?;
    // 𝓝 = M ∩ (moved)^⊥
    let comp = moved.orthogonal_complement(tol.rank)?;
    m.intersect(&comp, tol.rank)
}

/// Beurling symbol `θ : 𝓝 → Γ_{≤N} ⊗ 𝓤` of an invariant subspace, read off
/// the wandering basis: column `k` of `θ_α` is the `α`-component of `ν_k`.
pub fn beurling_symbol(m: &SubspaceBasis, u_dim: usize, d: usize, n: usize, tol: &Tolerances) -> Result<MultiAnalyticSymbol> {
    let nu = wandering_subspace(m, u_dim, d, n, tol)?;
    let p = nu.dim();
    let mut theta = MultiAnalyticSymbol::zero(d, n, p, u_dim);
    for (idx, c) in theta.coeffs.iter_mut().enumerate() {
        *c = nu.basis.rows(idx * u_dim, u_dim).into_owned();
    }
    Ok(theta)
}

/// Distance between `M` and the range of `M_θ` on `Γ_{≤N}`, measured as the
/// spectral norm of the difference of the two orthogonal projections.
pub fn beurling_roundtrip_residual(m: &SubspaceBasis, theta: &MultiAnalyticSymbol, tol: &Tolerances) -> Result<f64> {
    let ext = crate::symbols::extend(theta, theta.n);
    let range = SubspaceBasis::span(&ext, tol.rank)?;
    Ok(op_norm(&(range.projector() - m.projector())))
}

/// Pseudo-constrained dilation on `𝓗 ⊕ (Γ_{J,≤N} ⊗ 𝓓)`, as square matrices
/// with the constrained Fock part in the coordinates of `fock_basis`.
#[derive(Debug, Clone)]
pub struct PseudoConstrainedMid {
    pub s: OperatorTuple,
    pub fock_basis: SubspaceBasis,
    pub defect_dim: usize,
    pub dim_h: usize,
}

/// `S_i(h ⊕ d) = T_ih ⊕ [e_0 ⊗ D_ih + (L^J_i ⊗ 1) d]` with `L^J` the
/// compression of the creation operators to `Γ_J`.
pub fn pseudo_constrained_mid(t: &OperatorTuple, j: &ConstraintSet, n: usize, tol: &Tolerances) -> Result<PseudoConstrainedMid> {
    let dd = defects(t, tol)?;
    let (h, rr, d) = (t.dim(), dd.defect.dim(), t.d());
    let f = TruncatedFock::new(d, n);
    let gj = constrained_fock(&f, j, tol.rank)?;
    let l = creation_ops(&f);
    let qj = &gj.basis;
    let kj = gj.dim();
    let vac: CMat = qj.row(0).adjoint().resize(kj, 1, crate::numkit::ZERO);
    let dim = h + kj * rr;
    let mut mats = Vec::with_capacity(d);
    for i in 0..d {
        let lj = qj.adjoint() * &l.mats[i] * qj;
        let mut m = zeros(dim, dim);
        m.view_mut((0, 0), (h, h)).copy_from(&t.mats[i]);
        let emb = crate::numkit::kron(&vac, &dd.slot_in_coords(i, h));
        m.view_mut((h, 0), (kj * rr, h)).copy_from(&emb);
        m.view_mut((h, h), (kj * rr, kj * rr))
            .copy_from(&crate::numkit::kron(&lj, &eye(rr)));
        mats.push(m);
    }
    Ok(PseudoConstrainedMid {
        s: OperatorTuple { mats },
        fock_basis: gj,
        defect_dim: rr,
        dim_h: h,
    })
}

/// Compression of the dilation to its maximal `J`-constrained piece, in an
/// orthonormal basis whose first `dim 𝓗` vectors span `𝓗`.
#[derive(Debug, Clone)]
pub struct ConstrainedPiece {
    pub w: OperatorTuple,
    pub basis: CMat,
    pub dim_h: usize,
}

pub fn constrained_piece_of_mid(t: &OperatorTuple, j: &ConstraintSet, n: usize, tol: &Tolerances) -> Result<ConstrainedPiece> {
    let m = mid(t, n, tol)?;
    let sq = m.square();
    let piece = maximal_constrained_piece(&sq, j, tol.rank.max(1e-8))?;
    let h = t.dim();
    let total = sq.dim();
    let mut hbasis = zeros(total, h);
    hbasis.view_mut((0, 0), (h, h)).copy_from(&eye(h));
    let hsub = SubspaceBasis::from_orthonormal(hbasis.clone());
    let contained = piece.containment_residual(&hsub);
    if contained > 1e-6 {
        return Err(FockError::NotConstrained { residual: contained });
    }
    // 𝓗 first, then the rest of the piece
    let rest = piece.intersect(&hsub.orthogonal_complement(tol.rank)?, tol.rank)?;
    let basis = orthonormalize(&crate::numkit::hstack(&[&hbasis, &rest.basis]), tol.rank)?;
    let basis = crate::numkit::hstack(&[&hbasis, &basis.columns(h, basis.ncols() - h).into_owned()]);
    let w = sq.conjugate(&basis);
    Ok(ConstrainedPiece { w, basis, dim_h: h })
}

impl ConstrainedPiece {
    /// `max_{|α| ≤ len} ‖P_𝓗 W_α|_𝓗 − T_α‖`.
    pub fn dilation_residual(&self, t: &OperatorTuple, len: usize) -> f64 {
        let f = TruncatedFock::new(t.d(), len);
        let h = self.dim_h;
        f.words()
            .map(|w| {
                let wa = crate::fock::word_power(&self.w, &w);
                op_norm(&(wa.view((0, 0), (h, h)).into_owned() - crate::fock::word_power(t, &w)))
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Word;
    use crate::numkit::{from_real_rows, max_abs, r};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn mid_of_zero_is_the_shift() {
        let t = OperatorTuple::zero(1, 1);
        let m = mid(&t, 2, &tol()).unwrap();
        // V(h, d0, d1, d2) = (0, h, d0, d1, d2)
        let mut expect = zeros(5, 4);
        for k in 0..4 {
            expect[(k + 1, k)] = ONE;
        }
        assert_eq!(m.v[0], expect);
        assert!(m.isometry_residual() < 1e-15);
    }

    #[test]
    fn mid_of_scalar_is_schaeffer_column() {
        let lam = 0.6;
        let t = OperatorTuple::new(vec![from_real_rows(1, 1, &[lam])]).unwrap();
        let m = mid(&t, 3, &tol()).unwrap();
        let col = m.v[0].column(0);
        assert!((col[0].re - lam).abs() < 1e-14);
        assert!((col[1].norm() - (1.0 - lam * lam).sqrt()).abs() < 1e-14);
        assert!(col.iter().skip(2).all(|z| z.norm() == 0.0));
        assert!(m.isometry_residual() < 1e-12);
    }

    #[test]
    fn coisometric_mid_is_coisometric_below_top() {
        let s = 1.0 / 2f64.sqrt();
        let t = OperatorTuple::new(vec![
            from_real_rows(3, 3, &[0., 0., 0., 1., 0., 0., 0., 1., 1.]) * r(s),
            from_real_rows(3, 3, &[1., 1., 0., 0., 0., 1., 0., 0., 0.]) * r(s),
        ])
        .unwrap();
        let m = mid(&t, 3, &tol()).unwrap();
        let n = m.domain_dim();
        let sum = m.v.iter().fold(zeros(m.v[0].nrows(), m.v[0].nrows()), |a, v| a + v * v.adjoint());
        assert!(max_abs(&(sum.view((0, 0), (n, n)).into_owned() - eye(n))) < 1e-12);
        assert!(m.isometry_residual() < 1e-12);
        assert!(m.dilation_residual(3) < 1e-12);
    }

    #[test]
    fn poisson_examples() {
        let k = poisson_kernel(&OperatorTuple::zero(2, 2), 2, &tol()).unwrap();
        let mut expect = zeros(7 * 2, 2);
        expect.view_mut((0, 0), (2, 2)).copy_from(&eye(2));
        assert!(max_abs(&(k.adjoint() * &k - eye(2))) < 1e-14);
        assert!(max_abs(&(k.rows(0, 2).into_owned() * k.rows(0, 2).adjoint() - eye(2))) < 1e-14);
        assert!(max_abs(&k.rows(2, 12).into_owned()) < 1e-15);

        let t = OperatorTuple::new(vec![from_real_rows(1, 1, &[0.5])]).unwrap();
        let n = 6;
        let k = poisson_kernel(&t, n, &tol()).unwrap();
        let norm2 = (k.adjoint() * &k)[(0, 0)].re;
        let geom: f64 = (0..=n).map(|j| 0.75 * 0.25f64.powi(j as i32)).sum();
        assert!((norm2 - geom).abs() < 1e-14);
        assert!((1.0 - norm2 - 0.25f64.powi(n as i32 + 1)).abs() < 1e-14);
    }

    #[test]
    fn wandering_examples() {
        let (d, n) = (2, 3);
        let f = TruncatedFock::new(d, n);
        let whole = SubspaceBasis::full(f.total_dim() * 2);
        let nu = wandering_subspace(&whole, 2, d, n, &tol()).unwrap();
        assert_eq!(nu.dim(), 2);
        assert!(max_abs(&nu.basis.rows(2, nu.basis.nrows() - 2).into_owned()) < 1e-12);

        // words ending with 1: invariant under prepending
        let ends: Vec<usize> = (0..f.total_dim()).filter(|&i| f.word(i).0.last() == Some(&1)).collect();
        let mut b = zeros(f.total_dim(), ends.len());
        for (k, &i) in ends.iter().enumerate() {
            b[(i, k)] = ONE;
        }
        let m = SubspaceBasis::from_orthonormal(b);
        let nu = wandering_subspace(&m, 1, d, n, &tol()).unwrap();
        assert_eq!(nu.dim(), 1);
        assert!((nu.basis[(f.index(&Word::new(&[1])), 0)].norm() - 1.0).abs() < 1e-12);
        let theta = beurling_symbol(&m, 1, d, n, &tol()).unwrap();
        assert!((theta.coeff(&Word::new(&[1]))[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(beurling_roundtrip_residual(&m, &theta, &tol()).unwrap() < 1e-10);

        let zero = SubspaceBasis::zero(f.total_dim());
        assert_eq!(wandering_subspace(&zero, 1, d, n, &tol()).unwrap().dim(), 0);

        // words starting with 1 are not invariant under L_2
        let starts: Vec<usize> = (0..f.total_dim()).filter(|&i| f.word(i).0.first() == Some(&1)).collect();
        let mut b = zeros(f.total_dim(), starts.len());
        for (k, &i) in starts.iter().enumerate() {
            b[(i, k)] = ONE;
        }
        assert!(matches!(
            wandering_subspace(&SubspaceBasis::from_orthonormal(b), 1, d, n, &tol()),
            Err(FockError::NotInvariant { .. })
        ));
    }

    #[test]
    fn pseudo_constrained_trivial_cases() {
        let t = OperatorTuple::new(vec![
            from_real_rows(2, 2, &[0.0, 0.5, 0.0, 0.0]),
            from_real_rows(2, 2, &[0.3, 0.0, 0.0, 0.2]),
        ])
        .unwrap();
        let p = pseudo_constrained_mid(&t, &ConstraintSet::empty(), 2, &tol()).unwrap();
        let m = mid(&t, 2, &tol()).unwrap().square();
        for i in 0..2 {
            assert!(max_abs(&(&p.s.mats[i] - &m.mats[i])) < 1e-12);
        }
        let t1 = OperatorTuple::new(vec![from_real_rows(1, 1, &[0.5])]).unwrap();
        let p1 = pseudo_constrained_mid(&t1, &ConstraintSet::commutators(1), 3, &tol()).unwrap();
        let m1 = mid(&t1, 3, &tol()).unwrap().square();
        assert!(max_abs(&(&p1.s.mats[0] - &m1.mats[0])) < 1e-12);
    }
}
