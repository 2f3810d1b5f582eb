//! Seeded random instances for property tests and randomized suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::Tolerances;
use crate::error::Result;
use crate::liftings::{lift_from_gamma, Lifting};
use crate::numkit::{block_diag, c, op_norm, polar_factor, zeros, CMat, CVec, C64};
use crate::tuples::{defects, stability_report, OperatorTuple};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries i.i.d. standard complex Gaussian.
pub fn gaussian(rng: &mut SeededRng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) / c(2f64.sqrt(), 0.0)
    })
}

pub fn unit_vector(rng: &mut SeededRng, n: usize) -> CVec {
    let g = gaussian(rng, n, 1);
    let v = g.column(0).into_owned();
    let nv = v.norm();
    v / C64::new(nv, 0.0)
}

/// Haar-ish unitary from the polar factor of a Gaussian matrix.
pub fn unitary(rng: &mut SeededRng, n: usize) -> CMat {
    loop {
        if let Ok(u) = polar_factor(&gaussian(rng, n, n)) {
            if u.ncols() == n {
                return u;
            }
        }
    }
}

/// `rows × cols` matrix with orthonormal columns (`rows ≥ cols`).
pub fn isometry(rng: &mut SeededRng, rows: usize, cols: usize) -> CMat {
    unitary(rng, rows).columns(0, cols).into_owned()
}

/// Random tuple scaled to the given row norm `‖ΣT_iT_i^*‖^{1/2}`.
pub fn row_contraction(rng: &mut SeededRng, d: usize, dim: usize, norm: f64) -> OperatorTuple {
    let mats: Vec<CMat> = (0..d).map(|_| gaussian(rng, dim, dim)).collect();
    let t = OperatorTuple { mats };
    let s = op_norm(&t.row_gram()).sqrt();
    t.scaled(norm / s)
}

/// Random coisometric tuple: `T_i^*` are the blocks of a random isometry
/// `ℂ^dim → ℂ^{d·dim}`.
pub fn coisometric(rng: &mut SeededRng, d: usize, dim: usize) -> OperatorTuple {
    let v = isometry(rng, d * dim, dim);
    OperatorTuple {
        mats: (0..d).map(|i| v.rows(i * dim, dim).adjoint()).collect(),
    }
}

/// `*`-stable row contraction on `ℂ^dim` with `rank D_* ≤ k`: the adjoints
/// are the top blocks of a random isometry into `ℂ^{d·dim + k}`.
pub fn low_defect_stable(rng: &mut SeededRng, d: usize, dim: usize, k: usize, tol: &Tolerances) -> Result<OperatorTuple> {
    loop {
        let v = isometry(rng, d * dim + k, dim);
        let t = OperatorTuple {
            mats: (0..d).map(|i| v.rows(i * dim, dim).adjoint()).collect(),
        };
        if stability_report(&t, tol)?.star_stable {
            return Ok(t);
        }
    }
}

/// Ergodic coisometric tuple on `ℂ^dim` (`d ≥ 2`), built as the lifting of a
/// unit vector `ω` on `ℂΩ` by a `*`-stable `Å` with an isometric `γ`, then
/// conjugated by a random unitary. Returns the tuple and `Ω`.
pub fn ergodic_coisometric(rng: &mut SeededRng, d: usize, dim: usize, tol: &Tolerances) -> Result<(OperatorTuple, CVec)> {
    assert!(d >= 2 && dim >= 1);
    let omega = unit_vector(rng, d);
    let c_tuple = OperatorTuple {
        mats: omega.iter().map(|&w| CMat::from_element(1, 1, w)).collect(),
    };
    let e = if dim == 1 {
        c_tuple
    } else {
        let k = rng.random_range(1..d);
        let ring = low_defect_stable(rng, d, dim - 1, k, tol)?;
        let rc = defects(&c_tuple, tol)?.defect.dim();
        let ra = defects(&ring, tol)?.defect_star.dim();
        let gamma = isometry(rng, rc, ra);
        lift_from_gamma(&c_tuple, &ring, &gamma, tol)?.total()
    };
    let u = unitary(rng, dim);
    let mats = e.mats.iter().map(|m| &u * m * u.adjoint()).collect();
    let om = u.column(0).into_owned();
    Ok((OperatorTuple { mats }, om))
}

/// Coisometric subisometric lifting: coisometric `C` (optionally a direct
/// sum of two coisometric blocks, so that `Φ_C` is not ergodic), `*`-stable
/// `A`, isometric `γ`. Requires `dim 𝓓_{*,A} ≤ (d−1)·m_c`.
pub fn subisometric_coisometric(
    rng: &mut SeededRng,
    d: usize,
    m_c: usize,
    m_a: usize,
    split_c: bool,
    tol: &Tolerances,
) -> Result<Lifting> {
    let c = if split_c && m_c >= 2 {
        let c1 = coisometric(rng, d, 1);
        let c2 = coisometric(rng, d, m_c - 1);
        OperatorTuple {
            mats: (0..d).map(|i| block_diag(&[&c1.mats[i], &c2.mats[i]])).collect(),
        }
    } else {
        coisometric(rng, d, m_c)
    };
    let norm = rng.random_range(0.5..0.95);
    let a = row_contraction(rng, d, m_a, norm);
    let rc = defects(&c, tol)?.defect.dim();
    let ra = defects(&a, tol)?.defect_star.dim();
    let gamma = isometry(rng, rc, ra);
    lift_from_gamma(&c, &a, &gamma, tol)
}

/// Generic reduced lifting: strictly contractive `C` and `A` (so `A` is
/// `*`-stable and the defects have full rank) and an injective contraction
/// `γ`.
pub fn reduced_lifting(rng: &mut SeededRng, d: usize, m_c: usize, m_a: usize, tol: &Tolerances) -> Result<Lifting> {
    let (nc, na) = (rng.random_range(0.3..0.9), rng.random_range(0.3..0.9));
    let c = row_contraction(rng, d, m_c, nc);
    let a = row_contraction(rng, d, m_a, na);
    let rc = defects(&c, tol)?.defect.dim();
    let ra = defects(&a, tol)?.defect_star.dim();
    let g = gaussian(rng, rc, ra);
    let gamma = &g * C64::new(rng.random_range(0.5..0.99) / op_norm(&g), 0.0);
    lift_from_gamma(&c, &a, &gamma, tol)
}

/// Reduced lifting whose `A` is nilpotent (strictly lower triangular), so
/// its characteristic function is a polynomial of degree at most `m_a`.
pub fn nilpotent_lifting(rng: &mut SeededRng, d: usize, m_c: usize, m_a: usize, tol: &Tolerances) -> Result<Lifting> {
    let nc = rng.random_range(0.3..0.9);
    let c = row_contraction(rng, d, m_c, nc);
    let mats: Vec<CMat> = (0..d)
        .map(|_| {
            let mut g = gaussian(rng, m_a, m_a);
            for i in 0..m_a {
                for j in i..m_a {
                    g[(i, j)] = C64::new(0.0, 0.0);
                }
            }
            g
        })
        .collect();
    let raw = OperatorTuple { mats };
    let s = op_norm(&raw.row_gram()).sqrt();
    let a = if s > 0.0 {
        raw.scaled(rng.random_range(0.3..0.9) / s)
    } else {
        raw
    };
    let rc = defects(&c, tol)?.defect.dim();
    let ra = defects(&a, tol)?.defect_star.dim();
    let g = gaussian(rng, rc, ra);
    let gamma = &g * C64::new(rng.random_range(0.5..0.99) / op_norm(&g), 0.0);
    lift_from_gamma(&c, &a, &gamma, tol)
}

/// Commuting coisometric tuple `T_i = W diag(λ_{i,·}) W^*` with
/// `Σ_i |λ_{i,k}|² = 1` for every `k`.
pub fn commuting_coisometric(rng: &mut SeededRng, d: usize, dim: usize) -> OperatorTuple {
    let w = unitary(rng, dim);
    let cols: Vec<CVec> = (0..dim).map(|_| unit_vector(rng, d)).collect();
    let mats = (0..d)
        .map(|i| {
            let mut dg = zeros(dim, dim);
            for (k, v) in cols.iter().enumerate() {
                dg[(k, k)] = v[i];
            }
            &w * dg * w.adjoint()
        })
        .collect();
    OperatorTuple { mats }
}

/// Commuting lifting `E_i = c_i F` with `F = [[C_0, 0], [B_0, A_0]]` a
/// random strict contraction and `c` a unit vector.
pub fn commuting_lifting(rng: &mut SeededRng, d: usize, m_c: usize, m_a: usize, tol: &Tolerances) -> Result<Lifting> {
    let n = m_c + m_a;
    let mut f = gaussian(rng, n, n);
    for i in 0..m_c {
        for j in m_c..n {
            f[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    let f = &f * C64::new(rng.random_range(0.5..0.95) / op_norm(&f), 0.0);
    let cv = unit_vector(rng, d);
    let e: Vec<CMat> = cv.iter().map(|&ci| &f * ci).collect();
    Lifting::from_blocks(
        OperatorTuple {
            mats: e.iter().map(|m| m.view((0, 0), (m_c, m_c)).into_owned()).collect(),
        },
        OperatorTuple {
            mats: e.iter().map(|m| m.view((m_c, m_c), (m_a, m_a)).into_owned()).collect(),
        },
        e.iter().map(|m| m.view((m_c, 0), (m_a, m_c)).into_owned()).collect(),
        tol,
    )
}

/// Unitary on `ℂ^{m_c + m_a}` that is the identity on the first `m_c`
/// coordinates.
pub fn block_unitary_fixing(rng: &mut SeededRng, m_c: usize, m_a: usize) -> CMat {
    let u = unitary(rng, m_a);
    let mut out = zeros(m_c + m_a, m_c + m_a);
    for k in 0..m_c {
        out[(k, k)] = C64::new(1.0, 0.0);
    }
    out.view_mut((m_c, m_c), (m_a, m_a)).copy_from(&u);
    out
}
