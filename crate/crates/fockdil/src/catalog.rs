//! Worked example tuples and liftings, at explicit truncations.

use crate::config::Tolerances;
use crate::error::Result;
use crate::fock::{creation_ops, TruncatedFock};
use crate::liftings::Lifting;
use crate::numkit::{from_real_rows, r, zeros, CMat};
use crate::sparse::{creation_ops_sparse, SparseTuple};
use crate::tuples::OperatorTuple;

/// The ergodic coisometric pair on `ℂ^3` whose `*`-stable part has
/// `Σ_{|α|=n} Å_αÅ_α^* = (1/(3·2^{n−1}))·[[1,−1,0],[−1,2,−1],[0,−1,1]]`.
pub fn ergodic_pair() -> OperatorTuple {
    let s = 1.0 / 2f64.sqrt();
    let a1 = from_real_rows(3, 3, &[0., 0., 0., 1., 0., 0., 0., 1., 1.]) * r(s);
    let a2 = from_real_rows(3, 3, &[1., 1., 0., 0., 0., 1., 0., 0., 0.]) * r(s);
    OperatorTuple { mats: vec![a1, a2] }
}

/// The matrix `[[1,−1,0],[−1,2,−1],[0,−1,1]]`.
pub fn ergodic_pair_decay_matrix() -> CMat {
    from_real_rows(3, 3, &[1., -1., 0., -1., 2., -1., 0., -1., 1.])
}

/// Backward shift `S^*` on `ℂ^k` (`e_1 ↦ 0`, `e_{j+1} ↦ e_j`).
pub fn backward_shift(k: usize) -> CMat {
    let mut m = zeros(k, k);
    for j in 0..k.saturating_sub(1) {
        m[(j, j + 1)] = r(1.0);
    }
    m
}

/// Bilateral weighted shift on `g_{−M..M}` with `A g_0 = λ g_1`,
/// `A g_i = g_{i+1}` otherwise, and `g_M ↦ 0`. Index `i + M` stores `g_i`.
pub fn weighted_shift_a(lambda: f64, m: usize) -> OperatorTuple {
    let n = 2 * m + 1;
    let mut a = zeros(n, n);
    for k in 0..n - 1 {
        let i = k as i64 - m as i64;
        a[(k + 1, k)] = r(if i == 0 { lambda } else { 1.0 });
    }
    OperatorTuple { mats: vec![a] }
}

/// Index of `g_i` in [`weighted_shift_a`].
pub fn weighted_shift_index(i: i64, m: usize) -> usize {
    (i + m as i64) as usize
}

/// `d = 1` lifting of the truncated `S^*` on `ℂ^{k_c}` by the bilateral
/// weighted shift, with `B = √(1−λ²)|g_1⟩⟨e_1|`.
pub fn weighted_shift_lifting(lambda: f64, k_c: usize, m: usize, tol: &Tolerances) -> Result<Lifting> {
    let c = OperatorTuple {
        mats: vec![backward_shift(k_c)],
    };
    let a = weighted_shift_a(lambda, m);
    let mut b = zeros(2 * m + 1, k_c);
    b[(weighted_shift_index(1, m), 0)] = r((1.0 - lambda * lambda).sqrt());
    Lifting::from_blocks(c, a, vec![b], tol)
}

/// `C_i = S^*/√2` on `ℂ^{k_c}`, `A_i = t/√2` on `ℂ`,
/// `B_i = (1/√2)(√(1−t²), 0, …)`.
pub fn scalar_pair_lifting(t: f64, k_c: usize, tol: &Tolerances) -> Result<Lifting> {
    let s = 1.0 / 2f64.sqrt();
    let ci = backward_shift(k_c) * r(s);
    let ai = from_real_rows(1, 1, &[t * s]);
    let mut bi = zeros(1, k_c);
    bi[(0, 0)] = r(s * (1.0 - t * t).sqrt());
    Lifting::from_blocks(
        OperatorTuple {
            mats: vec![ci.clone(), ci],
        },
        OperatorTuple {
            mats: vec![ai.clone(), ai],
        },
        vec![bi.clone(), bi],
        tol,
    )
}

/// `A_i = t/√2` on `ℂ`.
pub fn scalar_pair_a(t: f64) -> OperatorTuple {
    let ai = from_real_rows(1, 1, &[t / 2f64.sqrt()]);
    OperatorTuple {
        mats: vec![ai.clone(), ai],
    }
}

/// Coisometric lifting of `C = (1, 0)` on `ℂ` by the creation pair on
/// `Γ_{≤m}(ℂ²)`, `B_1 = 0`, `B_2 k = k e_0`.
pub fn creation_pair_lifting(m: usize, tol: &Tolerances) -> Result<Lifting> {
    let (c, a, b) = creation_pair_blocks(m);
    Lifting::from_blocks(c, a, b, tol)
}

pub fn creation_pair_blocks(m: usize) -> (OperatorTuple, OperatorTuple, Vec<CMat>) {
    let f = TruncatedFock::new(2, m);
    let c = OperatorTuple {
        mats: vec![from_real_rows(1, 1, &[1.0]), from_real_rows(1, 1, &[0.0])],
    };
    let a = creation_ops(&f);
    let b1 = zeros(f.total_dim(), 1);
    let mut b2 = zeros(f.total_dim(), 1);
    b2[(0, 0)] = r(1.0);
    (c, a, vec![b1, b2])
}

/// The creation pair on `Γ_{≤m}(ℂ²)` in sparse form.
pub fn creation_pair_a_sparse(m: usize) -> SparseTuple {
    creation_ops_sparse(&TruncatedFock::new(2, m))
}

/// [`creation_pair_blocks`] with `A` kept sparse, for truncations where the
/// dense creation operators do not fit in memory.
pub fn creation_pair_sparse_blocks(m: usize) -> (OperatorTuple, SparseTuple, Vec<CMat>) {
    let a = creation_pair_a_sparse(m);
    let n = a.dim();
    let c = OperatorTuple {
        mats: vec![from_real_rows(1, 1, &[1.0]), from_real_rows(1, 1, &[0.0])],
    };
    let mut b2 = zeros(n, 1);
    b2[(0, 0)] = r(1.0);
    (c, a, vec![zeros(n, 1), b2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liftings::classify;
    use crate::numkit::{eye, max_abs};
    use crate::tuples::is_coisometric;

    #[test]
    fn ergodic_pair_is_coisometric() {
        assert!(is_coisometric(&ergodic_pair(), 1e-14));
    }

    #[test]
    fn weighted_shift_blocks() {
        let tol = Tolerances::default();
        let l = weighted_shift_lifting(0.5, 6, 5, &tol).unwrap();
        let e = l.total();
        let g = e.row_gram();
        // only the truncation edges g_{−M} and e_{k_c} fail to be coisometric
        assert!(max_abs(&(g.view((0, 0), (5, 5)).into_owned() - eye(5))) < 1e-14);
        assert!((l.gamma.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_pair_gamma_matches() {
        let tol = Tolerances::default();
        let t = 0.5;
        let l = scalar_pair_lifting(t, 5, &tol).unwrap();
        let w = l.gamma_dstar(&tol).unwrap();
        // γD_{*,A} f = √(1−t²)/√2 (e_1; e_1)
        let v = (1.0 - t * t).sqrt() / 2f64.sqrt();
        assert!((w[(0, 0)] - r(v)).norm() < 1e-12 && (w[(5, 0)] - r(v)).norm() < 1e-12);
        assert!((l.gamma.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn creation_pair_is_coisometric_and_reduced() {
        let tol = Tolerances::default();
        let l = creation_pair_lifting(4, &tol).unwrap();
        let cl = classify(&l, &tol).unwrap();
        assert!(cl.is_coisometric_lifting && cl.gamma_isometric && cl.is_reduced);
        assert_eq!(creation_pair_a_sparse(4).to_dense().mats, l.a.mats);
        let (c, a, b) = creation_pair_sparse_blocks(4);
        assert_eq!((c, a.to_dense(), b), creation_pair_blocks(4));
    }
}
