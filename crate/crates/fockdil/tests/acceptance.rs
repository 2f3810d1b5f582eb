//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p fockdil --test acceptance`.

use std::time::{Duration, Instant};

use rand::Rng;

use fockdil::catalog::{
    creation_pair_a_sparse, creation_pair_lifting, creation_pair_sparse_blocks, ergodic_pair, ergodic_pair_decay_matrix,
    scalar_pair_a, scalar_pair_lifting, weighted_shift_a,
};
use fockdil::charfn::{
    case_two_splitting_residual, cocycle_product, cocycle_product_dense, constrained_unitarity_residual, extended_char,
    lifting_char, unitarity_residual,
};
use fockdil::cpmaps::{kappa, kappa_inverse, limit_of_powers, pad, CPMap};
use fockdil::dilation::{constrained_piece_of_mid, poisson_kernel};
use fockdil::fock::{constrained_fock, level_dims, maximal_constrained_piece, ConstraintSet, TruncatedFock};
use fockdil::invariants::{
    curvature_free_sparse, curvature_identity_check_sparse, curvature_sym, dense_symbol_trace, euler_free_sparse,
    euler_sym, split_count_traces, symbol_level_norms, EstimateMethod, SymmetricConfig, TraceWindow,
};
use fockdil::liftings::{classify, lift_from_gamma, stack, Lifting};
use fockdil::numkit::{eye, fro_norm, max_abs, op_norm, r, zeros, CMat};
use fockdil::random::{
    block_unitary_fixing, commuting_coisometric, commuting_lifting, coisometric, ergodic_coisometric, gaussian,
    isometry, reduced_lifting, row_contraction, seeded, subisometric_coisometric,
};
use fockdil::symbols::{compose, equivalent};
use fockdil::tuples::{defects, eigen_frame, restrict_off_omega, OperatorTuple};
use fockdil::Tolerances;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within(elapsed: Duration, limit: Duration, msg: String) -> Outcome {
    check(elapsed < limit, format!("{msg}; {:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()))
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn fail<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> String + '_ {
    move |e| format!("{what}: {e}")
}

/// Decay of `Σ_{|α|=n} Å_αÅ_α^*` on the ergodic pair, through `Φ_A^n(q)` and
/// through the compressed tuple `Å`.
fn decay_matrix() -> Outcome {
    let start = Instant::now();
    let t = tol();
    let a = ergodic_pair();
    let frame = eigen_frame(&a, None, &t).map_err(fail("frame"))?;
    let (ring, q) = restrict_off_omega(&a, &frame, &t).map_err(fail("restrict"))?;
    let om = CMat::from_column_slice(3, 1, frame.omega_vec.as_slice());
    let mut via_a = eye(3) - &om * om.adjoint();
    let phi_a = CPMap::new(&a);
    let phi_ring = CPMap::new(&ring);
    let mut via_ring = eye(ring.dim());
    let m3 = ergodic_pair_decay_matrix();
    let mut worst: f64 = 0.0;
    for n in 1..=12 {
        via_a = phi_a.apply_once(&via_a);
        via_ring = phi_ring.apply_once(&via_ring);
        let expect = &m3 * r(1.0 / (3.0 * 2f64.powi(n - 1)));
        worst = worst.max(max_abs(&(&via_a - &expect)));
        worst = worst.max(max_abs(&(&q * &via_ring * q.adjoint() - &expect)));
    }
    let msg = format!("max entry error {worst:.2e} over n=1..12, both routes");
    if worst > 1e-10 {
        return Err(msg);
    }
    within(start.elapsed(), Duration::from_secs(1), msg)
}

/// Coefficients of `θ̂_A d^1_Ω` and `θ̂_A d^2_Ω` on the ergodic pair at `N = 8`.
fn extended_coefficients() -> Outcome {
    let start = Instant::now();
    let t = tol();
    let n = 8;
    let a = ergodic_pair();
    let ext = extended_char(&a, None, n, &t).map_err(fail("extended_char"))?;
    let f = TruncatedFock::new(2, n);
    let om = &ext.frame.omega_vec;
    let base = [-1.0 / 6.0, 1.0 / 6.0];
    let mut worst_pattern: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    let mut worst_sign: f64 = 0.0;
    for idx in 0..f.total_dim() {
        let w = f.word(idx);
        let g = &ext.generators[idx];
        let v1 = g.columns(0, 3) * om;
        let v2 = g.columns(3, 3) * om;
        worst_sign = worst_sign.max((&v1 + &v2).norm());
        let scale = if w.is_empty() {
            -1.0
        } else if w.has_no_repeated_adjacent() {
            0.5f64.sqrt().powi(w.len() as i32)
        } else {
            0.0
        };
        let err = (0..2).map(|k| (v1[k] - r(scale * base[k])).norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            worst_zero = worst_zero.max(err);
        } else {
            worst_pattern = worst_pattern.max(err);
        }
    }
    let elapsed = start.elapsed();
    let msg = format!(
        "pattern error {worst_pattern:.2e}, off-pattern max {worst_zero:.2e}, d1+d2 max {worst_sign:.2e}, symbol consistency {:.2e}",
        ext.consistency
    );
    if worst_pattern > 1e-10 || worst_zero > 1e-10 || worst_sign > 1e-10 || ext.consistency > 1e-10 {
        return Err(msg);
    }
    within(elapsed, Duration::from_secs(5), msg)
}

fn splitting() -> Outcome {
    let t = tol();
    let ext = extended_char(&ergodic_pair(), None, 6, &t).map_err(fail("extended_char"))?;
    let mut worst = case_two_splitting_residual(&ext, &t).map_err(fail("residual"))?;
    let pair_residual = worst;
    let mut rng = seeded(3001);
    for _ in 0..50 {
        let d = rng.random_range(2..=3);
        let dim = rng.random_range(2..=5);
        let (a, _) = ergodic_coisometric(&mut rng, d, dim, &t).map_err(fail("instance"))?;
        let ext = extended_char(&a, None, 4, &t).map_err(fail("extended_char"))?;
        worst = worst.max(case_two_splitting_residual(&ext, &t).map_err(fail("residual"))?);
    }
    check(
        worst < 1e-9,
        format!("ergodic pair {pair_residual:.2e}; worst over 50 random tuples {worst:.2e}"),
    )
}

/// Conjugates a lifting by a unitary that fixes `𝓗_C` and re-reads the blocks.
fn conjugate_lifting(l: &Lifting, u: &CMat, t: &Tolerances) -> fockdil::Result<Lifting> {
    let e = l.total().conjugate(u);
    let (mc, ma) = (l.dim_c(), l.dim_a());
    let c = OperatorTuple {
        mats: e.mats.iter().map(|m| m.view((0, 0), (mc, mc)).into_owned()).collect(),
    };
    let a = OperatorTuple {
        mats: e.mats.iter().map(|m| m.view((mc, mc), (ma, ma)).into_owned()).collect(),
    };
    let b = e.mats.iter().map(|m| m.view((mc, 0), (ma, mc)).into_owned()).collect();
    Lifting::from_blocks(c, a, b, t)
}

fn completeness() -> Outcome {
    let t = tol();
    let n = 4;
    let mut rng = seeded(3002);
    let mut worst_pos: f64 = 0.0;
    for _ in 0..100 {
        let m_c = rng.random_range(1..=2);
        let m_a = rng.random_range(1..=3);
        let l = reduced_lifting(&mut rng, 2, m_c, m_a, &t).map_err(fail("instance"))?;
        if !classify(&l, &t).map_err(fail("classify"))?.is_reduced {
            return Err("random lifting is not reduced".into());
        }
        let u = block_unitary_fixing(&mut rng, m_c, m_a);
        let lu = conjugate_lifting(&l, &u, &t).map_err(fail("conjugate"))?;
        let th = lifting_char(&l, n, false, &t).map_err(fail("char"))?.symbol;
        let thu = lifting_char(&lu, n, false, &t).map_err(fail("char"))?.symbol;
        worst_pos = worst_pos.max(equivalent(&th, &thu, 1e-7).residual);
    }
    let mut least_neg = f64::INFINITY;
    for _ in 0..20 {
        let c = row_contraction(&mut rng, 2, 1, 0.6);
        let a = row_contraction(&mut rng, 2, 2, 0.6);
        let rc = defects(&c, &t).map_err(fail("defects"))?.defect.dim();
        let ra = defects(&a, &t).map_err(fail("defects"))?.defect_star.dim();
        let full = isometry(&mut rng, rc, ra) * r(0.9);
        let mut low = zeros(rc, ra);
        low.set_column(0, &full.column(0));
        let l1 = lift_from_gamma(&c, &a, &full, &t).map_err(fail("lift"))?;
        let l2 = lift_from_gamma(&c, &a, &low, &t).map_err(fail("lift"))?;
        let th1 = lifting_char(&l1, n, true, &t).map_err(fail("char"))?.symbol;
        let th2 = lifting_char(&l2, n, true, &t).map_err(fail("char"))?.symbol;
        least_neg = least_neg.min(equivalent(&th1, &th2, 1e-7).residual);
    }
    check(
        worst_pos < 1e-7 && least_neg > 0.05,
        format!("worst equivalent-pair residual {worst_pos:.2e} (100 pairs); smallest non-equivalent residual {least_neg:.3} (20 pairs)"),
    )
}

fn factorization() -> Outcome {
    let t = tol();
    let (n, top) = (6, 3);
    let f = TruncatedFock::new(2, top);
    let mut rng = seeded(3003);
    let mut worst: f64 = 0.0;
    let mut reduced = 0;
    for _ in 0..50 {
        let m_c = rng.random_range(1..=2);
        let m_a = rng.random_range(1..=2);
        let m_b = rng.random_range(1..=2);
        let l1 = reduced_lifting(&mut rng, 2, m_c, m_a, &t).map_err(fail("first step"))?;
        let e = l1.total();
        let norm = rng.random_range(0.3..0.9);
        let a2 = row_contraction(&mut rng, 2, m_b, norm);
        let rc = defects(&e, &t).map_err(fail("defects"))?.defect.dim();
        let ra = defects(&a2, &t).map_err(fail("defects"))?.defect_star.dim();
        let g = gaussian(&mut rng, rc, ra);
        let g = &g * r(rng.random_range(0.5..0.99) / op_norm(&g));
        let l2 = lift_from_gamma(&e, &a2, &g, &t).map_err(fail("second step"))?;
        let l12 = stack(&l1, &l2, &t).map_err(fail("stack"))?;
        if classify(&l12, &t).map_err(fail("classify"))?.is_reduced {
            reduced += 1;
        }
        let t1 = lifting_char(&l1, n, false, &t).map_err(fail("char"))?.symbol;
        let t2 = lifting_char(&l2, n, true, &t).map_err(fail("char"))?.symbol;
        let t12 = lifting_char(&l12, n, true, &t).map_err(fail("char"))?.symbol;
        let comp = compose(&t1, &t2).map_err(fail("compose"))?;
        for k in 0..f.total_dim() {
            worst = worst.max(fro_norm(&(&t12.coeffs[k] - &comp.coeffs[k])));
        }
    }
    check(
        worst < 1e-8 && reduced == 50,
        format!("worst coefficient error {worst:.2e} for |α| ≤ {top}; {reduced}/50 stacked liftings reduced"),
    )
}

fn unitarity() -> Outcome {
    let t = tol();
    let (n, n_buf) = (5, 3);
    let bound_for = |a: &OperatorTuple| 1e-8f64.max(op_norm(&CPMap::new(a).apply(&eye(a.dim()), n_buf)));
    let l3 = creation_pair_lifting(4, &t).map_err(fail("creation pair"))?;
    let res3 = unitarity_residual(&l3, n, false, &t).map_err(fail("residual"))?;
    let mut failures = usize::from(res3 >= bound_for(&l3.a));
    let mut worst_ratio: f64 = 0.0;
    let mut rng = seeded(3004);
    for _ in 0..50 {
        let m_c = rng.random_range(2..=3);
        let m_a = rng.random_range(1..=m_c);
        let l = subisometric_coisometric(&mut rng, 2, m_c, m_a, false, &t).map_err(fail("instance"))?;
        let res = unitarity_residual(&l, n, false, &t).map_err(fail("residual"))?;
        let bound = bound_for(&l.a);
        worst_ratio = worst_ratio.max(res / bound);
        failures += usize::from(res >= bound);
    }
    let j = ConstraintSet::commutators(2);
    let l2 = scalar_pair_lifting(0.5, 6, &t).map_err(fail("scalar pair"))?;
    let mut worst_sym = constrained_unitarity_residual(&l2, &j, 4, true, true, &t).map_err(fail("constrained"))?;
    for _ in 0..10 {
        let l = commuting_lifting(&mut rng, 2, 2, 1, &t).map_err(fail("commuting instance"))?;
        worst_sym = worst_sym.max(constrained_unitarity_residual(&l, &j, 4, true, true, &t).map_err(fail("constrained"))?);
    }
    check(
        failures == 0 && worst_sym < 1e-8,
        format!(
            "creation pair {res3:.2e}; worst residual/bound over 50 subisometric {worst_ratio:.2e}; commutator-constrained worst {worst_sym:.2e}"
        ),
    )
}

fn fixed_point_correspondence() -> Outcome {
    let t = tol();
    let mut rng = seeded(3005);
    let (m_c, m_a) = (3, 2);
    let mut worst_kappa: f64 = 0.0;
    let mut worst_unit: f64 = 0.0;
    let mut dims_agree = 0;
    let mut nonergodic = 0;
    for k in 0..30 {
        let l = subisometric_coisometric(&mut rng, 2, m_c, m_a, k % 2 == 0, &t).map_err(fail("instance"))?;
        let e = l.total();
        let fe = CPMap::new(&e).fixed_points(t.fix).map_err(fail("fixed points"))?;
        let fc = CPMap::new(&l.c).hermitian_fixed_points(t.fix).map_err(fail("fixed points"))?;
        if fe.len() == fc.len() {
            dims_agree += 1;
        }
        if fc.len() > 1 {
            nonergodic += 1;
        }
        for x in &fc {
            let lifted = kappa_inverse(&l, x, &t).map_err(fail("kappa_inverse"))?;
            worst_kappa = worst_kappa.max(op_norm(&(kappa(&lifted, m_c) - x)));
        }
        let (lim, _, _) = limit_of_powers(&e, &pad(&eye(m_c), m_a), 1e-12).map_err(fail("powers"))?;
        worst_unit = worst_unit.max(op_norm(&(lim - eye(m_c + m_a))));
    }
    let c = coisometric(&mut rng, 2, m_c);
    let a = coisometric(&mut rng, 2, m_a);
    let neg = Lifting::direct_sum(c, a, &t).map_err(fail("direct sum"))?;
    let (lim, _, _) = limit_of_powers(&neg.total(), &pad(&eye(m_c), m_a), 1e-12).map_err(fail("powers"))?;
    let neg_gap = op_norm(&(lim - eye(m_c + m_a)));
    check(
        dims_agree == 30 && worst_kappa < 1e-6 && worst_unit < 1e-6 && neg_gap > 1e-6,
        format!(
            "fixed-point dims agree {dims_agree}/30 ({nonergodic} with non-ergodic C); κ∘κ⁻¹ error {worst_kappa:.2e}; ‖Φ_E^n(p_C) − 1‖ {worst_unit:.2e}; negative control gap {neg_gap:.3}"
        ),
    )
}

fn curvature_numbers() -> Outcome {
    let start = Instant::now();
    let t = tol();
    let mut notes = Vec::new();
    let mut ok = true;

    let a3 = creation_pair_a_sparse(16);
    let fc = curvature_free_sparse(&a3, 15, &t).map_err(fail("curvature"))?;
    let exact = (1..=15).all(|m| {
        let want = 2f64.powi(m as i32) - 1.0;
        fc.cp_route[m - 1] == want && fc.kernel_route[m - 1] == want
    });
    let c12 = fc.trace.value_at(12).unwrap_or(f64::NAN);
    let chi = euler_free_sparse(&a3, 12, &t).map_err(fail("euler"))?;
    let chi12 = chi.value_at(12).unwrap_or(f64::NAN);
    ok &= exact && (c12 - 1.0).abs() < 1e-3 && (chi12 - 1.0).abs() < 1e-3;
    notes.push(format!("creation pair exact={exact} c_12={c12:.6} χ_12={chi12:.6}"));

    let a2 = scalar_pair_a(0.5);
    let cfg = SymmetricConfig::new(30);
    let cs = curvature_sym(&a2, &cfg, &t).map_err(fail("curvature_sym"))?;
    let es = euler_sym(&a2, &cfg, &t).map_err(fail("euler_sym"))?;
    let v = cs.power.value_at(30).unwrap_or(f64::NAN);
    let expect = 2.0 * (1.0 - 0.25f64.powi(31)) / 900.0;
    let chi_s = es.power.value_at(30).unwrap_or(f64::NAN);
    ok &= v < 0.01 && (v - expect).abs() < 1e-12 && (chi_s - 2.0 / 900.0).abs() < 1e-12;
    notes.push(format!("scalar pair curv_s(30)={v:.3e} χ_s(30)={chi_s:.3e}"));

    for lambda in [0.0, 0.5, 0.9] {
        let a1 = weighted_shift_a(lambda, 200);
        let cfg = SymmetricConfig {
            n_max: 50,
            window: TraceWindow::LowerEdge,
            method: EstimateMethod::Richardson,
            poisson_max_dim: 0,
        };
        let cs = curvature_sym(&a1, &cfg, &t).map_err(fail("curvature_sym"))?;
        let es = euler_sym(&a1, &cfg, &t).map_err(fail("euler_sym"))?;
        let one_minus = 1.0 - lambda * lambda;
        let raw_exact = cs
            .power
            .sequence
            .iter()
            .all(|p| (p.raw - (p.n as f64 + 1.0) * one_minus).abs() < 1e-9);
        let err = (cs.power.estimate - one_minus).abs();
        let chi_err = (es.power.estimate - 1.0).abs();
        ok &= raw_exact && err < 1e-6 && chi_err < 1e-6;
        notes.push(format!("λ={lambda}: window trace exact={raw_exact} |curv_s − (1−λ²)|={err:.1e} |χ_s − 1|={chi_err:.1e}"));
    }
    let msg = notes.join("; ");
    if !ok {
        return Err(msg);
    }
    within(start.elapsed(), Duration::from_secs(30), msg)
}

fn curvature_identity() -> Outcome {
    let t = tol();
    let (c, a, b) = creation_pair_sparse_blocks(13);
    let rep = curvature_identity_check_sparse(&c, &a, &b, 12, &t).map_err(fail("identity"))?;
    let rhs = rep.rhs.value_at(12).unwrap_or(f64::NAN);
    let curv = rep.curvature.value_at(12).unwrap_or(f64::NAN);
    let mut worst_split: f64 = 0.0;
    let mut rng = seeded(3009);
    for n in 1..=5 {
        let l = reduced_lifting(&mut rng, 2, 1 + n % 2, 2, &t).map_err(fail("instance"))?;
        let th = lifting_char(&l, n, false, &t).map_err(fail("char"))?.symbol;
        let split = split_count_traces(&symbol_level_norms(&th), 2);
        for (k, s) in split.iter().enumerate() {
            let dense = dense_symbol_trace(&th.truncated(k), k);
            worst_split = worst_split.max((s - dense).abs() / dense.max(1.0));
        }
    }
    check(
        (rhs - 1.0).abs() < 0.02 && (curv - 1.0).abs() < 0.02 && worst_split < 1e-9,
        format!("rank D_C={} RHS(12)={rhs:.6} curv(12)={curv:.6}; split vs dense worst {worst_split:.2e} (N ≤ 5)", rep.rank_dc),
    )
}

fn cocycle() -> Outcome {
    let t = tol();
    let a = ergodic_pair();
    let frame = eigen_frame(&a, None, &t).map_err(fail("frame"))?;
    let (ring, _) = restrict_off_omega(&a, &frame, &t).map_err(fail("restrict"))?;
    let n = 12;
    let pk = poisson_kernel(&ring, n, &t).map_err(fail("poisson"))?;
    let phi = CPMap::new(&ring);
    let mut worst_margin = f64::INFINITY;
    let mut worst_decay: f64 = 0.0;
    let mut worst_dense: f64 = 0.0;
    for k in 2..=10 {
        let cp = cocycle_product(&ring, k, n, &t).map_err(fail("cocycle"))?;
        let phik = op_norm(&phi.apply(&eye(ring.dim()), k as u64));
        let gap = op_norm(&(&cp.fock_part - &pk));
        worst_margin = worst_margin.min(phik.sqrt() - gap);
        worst_decay = worst_decay.max((phik - 2f64.powi(1 - k as i32)).abs());
        worst_decay = worst_decay.max((cp.remainder_norm - phik).abs());
        if k <= 6 {
            // the dense oracle materializes every R_j^*, so it runs on a short truncation
            let short = cocycle_product(&ring, k, 6, &t).map_err(fail("cocycle"))?;
            let (fock, _) = cocycle_product_dense(&ring, k, 6, &t).map_err(fail("dense cocycle"))?;
            worst_dense = worst_dense.max(max_abs(&(fock - &short.fock_part)));
        }
    }
    check(
        worst_margin >= -1e-12 && worst_decay < 1e-10 && worst_dense < 1e-12,
        format!(
            "min sqrt‖Φ^k(1)‖ − gap {worst_margin:.2e}; ‖Φ^k(1)‖ vs 2^(1−k) {worst_decay:.2e}; dense product gap {worst_dense:.2e}"
        ),
    )
}

fn constrained() -> Outcome {
    let t = tol();
    let f = TruncatedFock::new(2, 6);
    let q = constrained_fock(&f, &ConstraintSet::commutators(2), t.rank).map_err(fail("constrained_fock"))?;
    let dims = level_dims(&f, &q);
    let piece = maximal_constrained_piece(&ergodic_pair(), &ConstraintSet::commutators(2), 1e-8).map_err(fail("piece"))?;
    let mut rng = seeded(3011);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.random_range(2..=3);
        let dim = rng.random_range(1..=4);
        let tu = commuting_coisometric(&mut rng, d, dim);
        let cp = constrained_piece_of_mid(&tu, &ConstraintSet::commutators(d), 3, &t).map_err(fail("mid piece"))?;
        worst = worst.max(cp.dilation_residual(&tu, 3));
    }
    check(
        dims == vec![1, 2, 3, 4, 5, 6, 7] && piece.dim() <= 1 && worst < 1e-8,
        format!(
            "level dims {dims:?}; ergodic pair commuting piece dim {}; worst dilation residual {worst:.2e} (20 tuples)",
            piece.dim()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("decay matrix of the ergodic pair", decay_matrix),
        ("extended characteristic function coefficients", extended_coefficients),
        ("splitting of the extended generators", splitting),
        ("completeness of the characteristic function", completeness),
        ("factorization through intermediate liftings", factorization),
        ("unitarity identity on buffered levels", unitarity),
        ("fixed-point correspondence", fixed_point_correspondence),
        ("curvature and Euler numbers", curvature_numbers),
        ("curvature identity for liftings", curvature_identity),
        ("cocycle product tail bound", cocycle),
        ("constrained machinery", constrained),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name} [{secs:.2}s]: {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{secs:.2}s]: {msg}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
