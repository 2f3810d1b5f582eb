//! Operator tuples, structural predicates and defect operators.


use crate::config::Tolerances;
use crate::cpmaps::{self, CPMap};
use crate::error::{FockError, Result};
use crate::numkit::{
    eigenvalues, eye, hstack, null_space, op_norm, psqrt, r, range_basis, vstack, zeros, CMat,
    CVec, SubspaceBasis, C64, ZERO,
};

/// `d` square matrices acting on a common space `ℂ^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTuple {
    pub mats: Vec<CMat>,
}

impl OperatorTuple {
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        if mats.is_empty() {
            return Err(FockError::DimensionMismatch("a tuple needs at least one operator".into()));
        }
        let n = mats[0].nrows();
        for (i, m) in mats.iter().enumerate() {
            if m.shape() != (n, n) {
                return Err(FockError::DimensionMismatch(format!(
                    "operator {} is {}x{}, expected {n}x{n}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !crate::numkit::is_finite(m) {
                return Err(FockError::Parse(format!("operator {} has non-finite entries", i + 1)));
            }
        }
        Ok(OperatorTuple { mats })
    }

    /// The zero tuple of `d` operators on `ℂ^dim`.
    pub fn zero(d: usize, dim: usize) -> Self {
        OperatorTuple {
            mats: vec![zeros(dim, dim); d],
        }
    }

    pub fn d(&self) -> usize {
        self.mats.len()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    /// `Σ T_i T_i^*`
    pub fn row_gram(&self) -> CMat {
        let n = self.dim();
        self.mats
            .iter()
            .fold(zeros(n, n), |acc, t| acc + t * t.adjoint())
    }

    /// The row operator `[T_1 … T_d] : ⊕ℂ^dim → ℂ^dim`.
    pub fn row(&self) -> CMat {
        let refs: Vec<&CMat> = self.mats.iter().collect();
        hstack(&refs)
    }

    /// Column of adjoints `(T_1^*; …; T_d^*)`, which equals `row()^*`.
    pub fn adjoint_column(&self) -> CMat {
        let adj: Vec<CMat> = self.mats.iter().map(|t| t.adjoint()).collect();
        let refs: Vec<&CMat> = adj.iter().collect();
        vstack(&refs)
    }

    pub fn row_norm(&self) -> f64 {
        op_norm(&self.row_gram()).sqrt()
    }

    pub fn is_row_contraction(&self, tol: f64) -> bool {
        op_norm(&self.row_gram()) <= 1.0 + tol
    }

    pub fn adjoints(&self) -> Vec<CMat> {
        self.mats.iter().map(|t| t.adjoint()).collect()
    }

    /// `U^* T_i U` for every `i` (for `U` with orthonormal columns this is a compression).
    pub fn conjugate(&self, u: &CMat) -> OperatorTuple {
        OperatorTuple {
            mats: self.mats.iter().map(|t| u.adjoint() * t * u).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> OperatorTuple {
        OperatorTuple {
            mats: self.mats.iter().map(|t| t * r(s)).collect(),
        }
    }
}

/// `‖Σ T_i T_i^* − 1‖ < tol`
pub fn is_coisometric(t: &OperatorTuple, tol: f64) -> bool {
    op_norm(&(t.row_gram() - eye(t.dim()))) < tol
}

/// Largest commutator norm `max_{i<j} ‖T_iT_j − T_jT_i‖`.
pub fn commutator_residual(t: &OperatorTuple) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..t.d() {
        for j in i + 1..t.d() {
            let c = &t.mats[i] * &t.mats[j] - &t.mats[j] * &t.mats[i];
            worst = worst.max(op_norm(&c));
        }
    }
    worst
}

pub fn is_commuting(t: &OperatorTuple, tol: f64) -> bool {
    commutator_residual(t) < tol
}

/// Defect operators and orthonormal bases of the defect spaces.
#[derive(Debug, Clone)]
pub struct DefectData {
    /// `D_* = (1 − Σ T_iT_i^*)^{1/2}` on `ℂ^dim`.
    pub dstar: CMat,
    /// `D = (δ_ij − T_i^*T_j)^{1/2}` on `ℂ^{d·dim}`, slot `i` occupying rows `i·dim..(i+1)·dim`.
    pub dfull: CMat,
    pub defect_star: SubspaceBasis,
    pub defect: SubspaceBasis,
}

impl DefectData {
    /// `Q_D^† D ι_i`: the map `h ↦ D(0,…,h,…,0)` in `𝓓` coordinates.
    pub fn slot_in_coords(&self, i: usize, dim: usize) -> CMat {
        self.defect.basis.adjoint() * self.dfull.columns(i * dim, dim)
    }
}

pub fn defects(t: &OperatorTuple, tol: &Tolerances) -> Result<DefectData> {
    let gram = t.row_gram();
    let norm = op_norm(&gram);
    if norm > 1.0 + tol.tol {
        return Err(FockError::NotContraction { norm });
    }
    let n = t.dim();
    let dstar = psqrt(&(eye(n) - gram), tol.tol)?;
    let col = t.adjoint_column();
    let dfull = psqrt(&(eye(n * t.d()) - &col * col.adjoint()), tol.tol)?;
    let defect_star = range_basis(&dstar, tol.rank)?;
    let defect = range_basis(&dfull, tol.rank)?;
    Ok(DefectData {
        dstar,
        dfull,
        defect_star,
        defect,
    })
}

/// Limit of `Φ^n(1)` and the spaces it determines.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub q: CMat,
    pub star_stable: bool,
    /// `𝓗¹ = ker(1 − Q)`.
    pub h1: SubspaceBasis,
    pub cnc: bool,
    /// Number of applications of `Φ` represented by `q`.
    pub horizon: u64,
    pub residual: f64,
}

pub fn stability_report(t: &OperatorTuple, tol: &Tolerances) -> Result<StabilityReport> {
    let norm = op_norm(&t.row_gram());
    if norm > 1.0 + tol.tol {
        return Err(FockError::NotContraction { norm });
    }
    let (q, horizon, residual) = cpmaps::limit_of_powers(t, &eye(t.dim()), tol.conv)?;
    let n = t.dim();
    let (vals, vecs) = crate::numkit::eigh(&q);
    let keep: Vec<usize> = (0..n).filter(|&k| (vals[k] - 1.0).abs() < tol.tol.max(1e-8)).collect();
    let mut h1 = zeros(n, keep.len());
    for (dst, &k) in keep.iter().enumerate() {
        h1.set_column(dst, &vecs.column(k));
    }
    let star_stable = op_norm(&q) < tol.tol.max(1e-8);
    Ok(StabilityReport {
        q,
        star_stable,
        cnc: keep.is_empty(),
        h1: SubspaceBasis::from_orthonormal(h1),
        horizon,
        residual,
    })
}

/// Joint eigenvector data of a coisometric tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFrame {
    /// `ω_i` with `A_i^*Ω = ω̄_i Ω`.
    pub omega: Vec<C64>,
    /// The unit vector `Ω`.
    pub omega_vec: CVec,
    /// `ℓ_i = A_iΩ − ω_iΩ`.
    pub ells: Vec<CVec>,
}

impl EigenFrame {
    /// Largest of `‖A_i^*Ω − ω̄_iΩ‖`.
    pub fn residual(&self, a: &OperatorTuple) -> f64 {
        a.mats
            .iter()
            .zip(&self.omega)
            .map(|(m, w)| (m.adjoint() * &self.omega_vec - &self.omega_vec * w.conj()).norm())
            .fold(0.0, f64::max)
    }
}

fn frame_from_vector(a: &OperatorTuple, v: &CVec) -> EigenFrame {
    let mut v = v.normalize();
    // fix the phase: largest component real and positive
    let (mut best, mut arg) = (0.0, 0);
    for (k, z) in v.iter().enumerate() {
        if z.norm() > best + 1e-12 {
            best = z.norm();
            arg = k;
        }
    }
    let phase = v[arg] / v[arg].norm();
    v /= phase;
    let omega: Vec<C64> = a.mats.iter().map(|m| (v.adjoint() * m * &v)[(0, 0)]).collect();
    let ells = a
        .mats
        .iter()
        .zip(&omega)
        .map(|(m, w)| m * &v - &v * *w)
        .collect();
    EigenFrame {
        omega,
        omega_vec: v,
        ells,
    }
}

fn sorted_eigenvalues(m: &CMat) -> Vec<C64> {
    let mut ev = eigenvalues(m);
    ev.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(a.re.partial_cmp(&b.re).unwrap())
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    ev
}

// Joint eigenvectors of ops[from..] inside span(s). Eigenvalues are scanned in
// the fixed order of `sorted_eigenvalues`.
fn joint_search(s: &SubspaceBasis, ops: &[CMat], from: usize, tol: &Tolerances) -> Result<Option<CVec>> {
    if s.dim() == 0 {
        return Ok(None);
    }
    if from == ops.len() {
        return Ok(Some(s.basis.column(0).into_owned()));
    }
    let inv = crate::numkit::largest_coinvariant_in(s, ops, 1e-7)?;
    if inv.dim() == 0 {
        return Ok(None);
    }
    let compressed = inv.basis.adjoint() * &ops[from] * &inv.basis;
    let mut seen: Vec<C64> = Vec::new();
    for mu in sorted_eigenvalues(&compressed) {
        if seen.iter().any(|s| (s - mu).norm() < 1e-7) {
            continue;
        }
        seen.push(mu);
        let shifted = &compressed - CMat::identity(inv.dim(), inv.dim()) * mu;
        let ker = null_space(&shifted, 1e-7)?;
        if ker.ncols() == 0 {
            continue;
        }
        let sub = SubspaceBasis::from_orthonormal(crate::numkit::orthonormalize(&(&inv.basis * ker), tol.rank)?);
        if let Some(v) = joint_search(&sub, ops, from + 1, tol)? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

/// Finds `Ω` with `A_i^*Ω = ω̄_iΩ` for every `i`.
pub fn eigen_frame(a: &OperatorTuple, hint: Option<&CVec>, tol: &Tolerances) -> Result<EigenFrame> {
    let adj = a.adjoints();
    if let Some(h) = hint {
        if h.len() != a.dim() || h.norm() == 0.0 {
            return Err(FockError::InvalidFrame { residual: f64::INFINITY });
        }
        let f = frame_from_vector(a, h);
        let res = f.residual(a);
        if res > tol.tol.max(1e-9) {
            return Err(FockError::InvalidFrame { residual: res });
        }
        return Ok(f);
    }
    let v = joint_search(&SubspaceBasis::full(a.dim()), &adj, 0, tol)?
        .ok_or(FockError::NoInvariantVectorState)?;
    let f = frame_from_vector(a, &v);
    if f.residual(a) > 1e-7 {
        return Err(FockError::NoInvariantVectorState);
    }
    Ok(f)
}

/// Orthonormal basis of `v^⊥` by Gram–Schmidt on `e_k − ⟨v,e_k⟩v` in index order.
pub fn complement_basis(v: &CVec) -> CMat {
    let n = v.len();
    let v = v.normalize();
    let mut cols: Vec<CVec> = Vec::new();
    for k in 0..n {
        let mut e = CVec::zeros(n);
        e[k] = r(1.0);
        let mut x = &e - &v * v[k].conj();
        for c in &cols {
            let proj = c.dotc(&x);
            x -= c * proj;
        }
        // second pass for stability
        let proj = v.dotc(&x);
        x -= &v * proj;
        for c in &cols {
            let proj = c.dotc(&x);
            x -= c * proj;
        }
        if x.norm() > 1e-8 && cols.len() < n - 1 {
            cols.push(x.normalize());
        }
    }
    let mut out = zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// `Å_i`: compression of `A_i` to `Ω^⊥` in the basis returned alongside.
pub fn restrict_off_omega(
    a: &OperatorTuple,
    f: &EigenFrame,
    tol: &Tolerances,
) -> Result<(OperatorTuple, CMat)> {
    let res = f.residual(a);
    if res > tol.tol.max(1e-9) {
        return Err(FockError::InvalidFrame { residual: res });
    }
    let q = complement_basis(&f.omega_vec);
    if q.ncols() == 0 {
        return Ok((
            OperatorTuple {
                mats: vec![zeros(0, 0); a.d()],
            },
            q,
        ));
    }
    Ok((a.conjugate(&q), q))
}

/// The unitary `[Ω | Ω^⊥ basis]` used to put `A` in block form.
pub fn frame_unitary(f: &EigenFrame) -> CMat {
    let q = complement_basis(&f.omega_vec);
    let om = CMat::from_column_slice(f.omega_vec.len(), 1, f.omega_vec.as_slice());
    hstack(&[&om, &q])
}

/// Fixed points of `Φ_T` are exactly the scalars.
pub fn is_ergodic(t: &OperatorTuple, tol: &Tolerances) -> Result<bool> {
    let phi = CPMap::new(t);
    let fix = phi.fixed_points(tol.fix)?;
    if fix.len() != 1 {
        return Ok(false);
    }
    let n = t.dim();
    let f = &fix[0];
    let scalar = f.trace() / r(n as f64);
    Ok(op_norm(&(f - eye(n) * scalar)) < tol.fix.max(1e-8) * (n as f64).sqrt() && scalar != ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{c, from_real_rows, max_abs};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    pub(crate) fn ergodic_pair() -> OperatorTuple {
        let s = 1.0 / 2f64.sqrt();
        OperatorTuple::new(vec![
            from_real_rows(3, 3, &[0., 0., 0., 1., 0., 0., 0., 1., 1.]) * r(s),
            from_real_rows(3, 3, &[1., 1., 0., 0., 0., 1., 0., 0., 0.]) * r(s),
        ])
        .unwrap()
    }

    #[test]
    fn defects_examples() {
        let z = OperatorTuple::zero(1, 1);
        let dd = defects(&z, &tol()).unwrap();
        assert_eq!(dd.dstar[(0, 0)], r(1.0));
        assert_eq!(dd.dfull[(0, 0)], r(1.0));

        let s = 1.0 / 2f64.sqrt();
        let t = OperatorTuple::new(vec![from_real_rows(1, 1, &[s]), from_real_rows(1, 1, &[s])]).unwrap();
        let dd = defects(&t, &tol()).unwrap();
        assert!(dd.dstar[(0, 0)].norm() < 1e-7);
        let expect = from_real_rows(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(max_abs(&(&dd.dfull - expect)) < 1e-12);
        assert_eq!(dd.defect_star.dim(), 0);
        assert_eq!(dd.defect.dim(), 1);

        let a = ergodic_pair();
        let dd = defects(&a, &tol()).unwrap();
        assert!(max_abs(&(&dd.dfull * &dd.dfull - &dd.dfull)) < 1e-9);
        // intertwining T D = D_* T
        assert!(max_abs(&(a.row() * &dd.dfull - &dd.dstar * a.row())) < 1e-9);
    }

    #[test]
    fn non_contraction_is_reported() {
        let t = OperatorTuple::new(vec![from_real_rows(1, 1, &[2.0])]).unwrap();
        match defects(&t, &tol()) {
            Err(FockError::NotContraction { norm }) => assert!((norm - 4.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn predicates() {
        assert!(is_coisometric(&ergodic_pair(), 1e-9));
        assert!(!is_coisometric(&OperatorTuple::zero(2, 1), 1e-9));
        let l = crate::fock::creation_ops(&crate::fock::TruncatedFock::new(2, 3));
        assert!(!is_commuting(&l, 1e-9));
        assert!(is_commuting(&OperatorTuple::zero(3, 2), 1e-9));
    }

    #[test]
    fn stability_examples() {
        let t = OperatorTuple::new(vec![from_real_rows(1, 1, &[0.6])]).unwrap();
        let s = stability_report(&t, &tol()).unwrap();
        assert!(s.star_stable && s.cnc);
        assert!(s.q[(0, 0)].norm() < 1e-12);

        let one = OperatorTuple::new(vec![eye(1)]).unwrap();
        let s = stability_report(&one, &tol()).unwrap();
        assert!(!s.star_stable && !s.cnc);
        assert_eq!(s.h1.dim(), 1);
        assert!((s.q[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_of_ergodic_pair() {
        let a = ergodic_pair();
        let f = eigen_frame(&a, None, &tol()).unwrap();
        let inv3 = 1.0 / 3f64.sqrt();
        for k in 0..3 {
            assert!((f.omega_vec[k] - r(inv3)).norm() < 1e-10);
        }
        let s = 1.0 / 2f64.sqrt();
        assert!((f.omega[0] - r(s)).norm() < 1e-10);
        assert!((f.omega[1] - r(s)).norm() < 1e-10);
        let l6 = 1.0 / 6f64.sqrt();
        let ell1 = CVec::from_vec(vec![r(-l6), ZERO, r(l6)]);
        assert!((&f.ells[0] - &ell1).norm() < 1e-10);
        assert!((&f.ells[1] + &ell1).norm() < 1e-10);
        // Σ ω̄_i ℓ_i = 0
        let sum = &f.ells[0] * f.omega[0].conj() + &f.ells[1] * f.omega[1].conj();
        assert!(sum.norm() < 1e-10);
    }

    #[test]
    fn frame_of_scalar_tuple() {
        let t = OperatorTuple::new(vec![
            CMat::from_element(1, 1, c(0.6, 0.0)),
            CMat::from_element(1, 1, c(0.0, 0.8)),
        ])
        .unwrap();
        let f = eigen_frame(&t, None, &tol()).unwrap();
        assert!((f.omega_vec[0] - r(1.0)).norm() < 1e-14);
        assert!(f.ells.iter().all(|l| l.norm() < 1e-14));
        let (ao, q) = restrict_off_omega(&t, &f, &tol()).unwrap();
        assert_eq!(q.ncols(), 0);
        assert_eq!(ao.dim(), 0);
    }

    #[test]
    fn no_joint_eigenvector() {
        // (1/√2)·diag(1,−1) and (1/√2)·swap: the adjoints share no eigenvector
        let s = 1.0 / 2f64.sqrt();
        let a1b = from_real_rows(2, 2, &[s, 0.0, 0.0, -s]);
        let a2 = from_real_rows(2, 2, &[0.0, s, s, 0.0]);
        let t = OperatorTuple::new(vec![a1b, a2]).unwrap();
        assert!(is_coisometric(&t, 1e-12));
        assert!(matches!(eigen_frame(&t, None, &tol()), Err(FockError::NoInvariantVectorState)));
    }

    #[test]
    fn restricted_ergodic_pair() {
        let a = ergodic_pair();
        let f = eigen_frame(&a, None, &tol()).unwrap();
        let (ao, q) = restrict_off_omega(&a, &f, &tol()).unwrap();
        assert_eq!(ao.dim(), 2);
        // back in ambient coordinates Å_1 matches the displayed 3×3 matrix
        let k = 1.0 / (3.0 * 2f64.sqrt());
        let a1 = from_real_rows(3, 3, &[0., 0., 0., 2., -1., -1., -2., 1., 1.]) * r(k);
        assert!(max_abs(&(&q * &ao.mats[0] * q.adjoint() - a1)) < 1e-12);
    }

    #[test]
    fn ergodicity_examples() {
        assert!(is_ergodic(&ergodic_pair(), &tol()).unwrap());
        let s = r(1.0 / 2f64.sqrt());
        let t = OperatorTuple::new(vec![eye(2) * s, eye(2) * s]).unwrap();
        assert!(!is_ergodic(&t, &tol()).unwrap());
        let u = CMat::from_diagonal(&CVec::from_vec(vec![r(1.0), c(0.0, 1.0)]));
        assert!(!is_ergodic(&OperatorTuple::new(vec![u]).unwrap(), &tol()).unwrap());
    }
}
