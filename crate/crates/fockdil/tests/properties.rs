//! Property tests of the structural invariants on seeded random instances.

use proptest::prelude::*;
use rand::Rng;

use fockdil::charfn::{case_two_splitting_residual, extended_char, lifting_char, unitarity_residual};
use fockdil::cpmaps::{limit_of_powers, pad, CPMap};
use fockdil::dilation::mid;
use fockdil::fock::{TruncatedFock, Word};
use fockdil::invariants::{curvature_free, dense_symbol_trace, euler_free, split_count_traces, symbol_level_norms};
use fockdil::io::{format_float, parse_json, to_json_string, LiftingFile, SymbolFile, TupleFile};
use fockdil::liftings::{classify, lift_from_gamma, recover_gamma};
use fockdil::numkit::{eigh, eye, max_abs, op_norm, r, vec_of};
use fockdil::random::{
    ergodic_coisometric, gaussian, isometry, reduced_lifting, row_contraction, seeded, subisometric_coisometric,
    unitary, SeededRng,
};
use fockdil::symbols::{compose, equivalent, extend, MultiAnalyticSymbol};
use fockdil::tuples::{defects, OperatorTuple};
use fockdil::Tolerances;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn random_tuple(rng: &mut SeededRng, d: usize, dim: usize) -> OperatorTuple {
    let norm = rng.random_range(0.2..0.999);
    row_contraction(rng, d, dim, norm)
}

fn random_symbol(rng: &mut SeededRng, d: usize, n: usize, dom: usize, cod: usize) -> MultiAnalyticSymbol {
    let mut th = MultiAnalyticSymbol::zero(d, n, dom, cod);
    for c in th.coeffs.iter_mut() {
        *c = gaussian(rng, cod, dom);
    }
    th
}

fn rel_close(a: f64, b: f64, eps: f64) -> bool {
    (a - b).abs() <= eps * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn telescoping_routes_agree(seed in any::<u64>(), d in 1usize..=3, dim in 1usize..=4) {
        let mut rng = seeded(seed);
        let t = random_tuple(&mut rng, d, dim);
        let fc = curvature_free(&t, 5, &tol()).unwrap();
        prop_assert!(fc.route_gap < 1e-9, "gap {:e}", fc.route_gap);
    }

    #[test]
    fn curvature_terms_stay_in_range(seed in any::<u64>(), d in 2usize..=3, dim in 1usize..=4) {
        let mut rng = seeded(seed);
        let t = random_tuple(&mut rng, d, dim);
        let rank_dstar = defects(&t, &tol()).unwrap().defect_star.dim() as f64;
        let fc = curvature_free(&t, 5, &tol()).unwrap();
        for p in &fc.trace.sequence {
            prop_assert!(p.value >= -1e-12 && p.value <= rank_dstar + 1e-9, "c_{} = {}", p.n, p.value);
        }
    }

    #[test]
    fn euler_rank_is_monotone_and_bounded(seed in any::<u64>(), d in 2usize..=3, dim in 1usize..=4) {
        let mut rng = seeded(seed);
        let t = random_tuple(&mut rng, d, dim);
        let rank_dstar = defects(&t, &tol()).unwrap().defect_star.dim() as f64;
        let chi = euler_free(&t, 4, &tol()).unwrap();
        let mut prev = 0.0;
        for p in &chi.sequence {
            prop_assert!(p.raw >= prev);
            prop_assert!(p.raw <= rank_dstar * p.normalization);
            prev = p.raw;
        }
    }

    #[test]
    fn mid_is_an_isometric_dilation(seed in any::<u64>(), d in 1usize..=3, dim in 1usize..=3) {
        let mut rng = seeded(seed);
        let t = random_tuple(&mut rng, d, dim);
        let m = mid(&t, 3, &tol()).unwrap();
        prop_assert!(m.isometry_residual() < 1e-10);
        prop_assert!(m.dilation_residual(2) < 1e-10);
    }

    #[test]
    fn superoperator_is_unital_on_gram_and_positive(seed in any::<u64>(), d in 1usize..=3, dim in 1usize..=4) {
        let mut rng = seeded(seed);
        let t = random_tuple(&mut rng, d, dim);
        let phi = CPMap::new(&t);
        let s1 = phi.superoperator() * vec_of(&eye(dim));
        prop_assert!((s1 - vec_of(&t.row_gram())).norm() < 1e-12);
        let g = gaussian(&mut rng, dim, dim);
        let psd = &g * g.adjoint();
        let (vals, _) = eigh(&phi.apply_once(&psd));
        prop_assert!(vals[0] >= -1e-12 * (1.0 + op_norm(&psd)));
    }

    #[test]
    fn compose_matches_matrix_product(seed in any::<u64>(), d in 1usize..=2, n in 1usize..=3) {
        let mut rng = seeded(seed);
        let (p, q, s) = (rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=2));
        let theta = random_symbol(&mut rng, d, n, p, q);
        let eta = random_symbol(&mut rng, d, n, s, p);
        let prod = compose(&theta, &eta).unwrap();
        let lhs = extend(&prod, n);
        let rhs = extend(&theta, n) * extend(&eta, n);
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-10);
    }

    #[test]
    fn equivalence_recovers_a_domain_unitary(seed in any::<u64>(), d in 1usize..=3, dom in 1usize..=3) {
        let mut rng = seeded(seed);
        let theta = random_symbol(&mut rng, d, 2, dom, 2);
        let v = unitary(&mut rng, dom);
        let rotated = theta.right_mul(&v);
        let eq = equivalent(&theta, &rotated, 1e-9);
        prop_assert!(eq.equivalent, "residual {:e}", eq.residual);
        let found = eq.v.unwrap();
        prop_assert!(max_abs(&(&v * found - eye(dom))) < 1e-9);
    }

    #[test]
    fn split_counting_matches_dense(seed in any::<u64>(), d in 1usize..=3, n in 0usize..=3) {
        let mut rng = seeded(seed);
        let theta = random_symbol(&mut rng, d, n, 2, 1);
        let split = split_count_traces(&symbol_level_norms(&theta), d);
        for (k, s) in split.iter().enumerate() {
            let dense = dense_symbol_trace(&theta.truncated(k), k);
            prop_assert!(rel_close(*s, dense, 1e-12), "level {}: {} vs {}", k, s, dense);
        }
    }

    #[test]
    fn unitarity_identity_for_subisometric_liftings(seed in any::<u64>(), m_c in 1usize..=3, m_a in 1usize..=2) {
        prop_assume!(m_a <= m_c);
        let mut rng = seeded(seed);
        let l = subisometric_coisometric(&mut rng, 2, m_c, m_a, false, &tol()).unwrap();
        prop_assert!(unitarity_residual(&l, 3, false, &tol()).unwrap() < 1e-9);
        let cl = classify(&l, &tol()).unwrap();
        prop_assert!(cl.is_subisometric && cl.is_coisometric_lifting);
        let (lim, _, _) = limit_of_powers(&l.total(), &pad(&eye(m_c), m_a), 1e-12).unwrap();
        prop_assert!(op_norm(&(lim - eye(m_c + m_a))) < 1e-6);
    }

    #[test]
    fn gamma_roundtrips_through_the_blocks(seed in any::<u64>(), m_c in 1usize..=2, m_a in 1usize..=3) {
        let mut rng = seeded(seed);
        let c = random_tuple(&mut rng, 2, m_c);
        let a = random_tuple(&mut rng, 2, m_a);
        let rc = defects(&c, &tol()).unwrap().defect.dim();
        let ra = defects(&a, &tol()).unwrap().defect_star.dim();
        let g = gaussian(&mut rng, rc, ra);
        let g = &g * r(0.9 / op_norm(&g));
        let l = lift_from_gamma(&c, &a, &g, &tol()).unwrap();
        let (back, _) = recover_gamma(&l.c, &l.a, &l.b, &tol()).unwrap();
        prop_assert!(max_abs(&(back - g)) < 1e-7);
    }

    #[test]
    fn isometric_gamma_gives_coisometric_lifting(seed in any::<u64>(), m_c in 1usize..=3) {
        let mut rng = seeded(seed);
        let c = fockdil::random::coisometric(&mut rng, 2, m_c);
        let a = random_tuple(&mut rng, 2, 1);
        let rc = defects(&c, &tol()).unwrap().defect.dim();
        let ra = defects(&a, &tol()).unwrap().defect_star.dim();
        prop_assume!(ra <= rc);
        let l = lift_from_gamma(&c, &a, &isometry(&mut rng, rc, ra), &tol()).unwrap();
        prop_assert!(fockdil::tuples::is_coisometric(&l.total(), 1e-9));
    }

    #[test]
    fn extended_splitting_on_random_ergodic(seed in any::<u64>(), d in 2usize..=3, dim in 2usize..=4) {
        let mut rng = seeded(seed);
        let (a, _) = ergodic_coisometric(&mut rng, d, dim, &tol()).unwrap();
        let ext = extended_char(&a, None, 3, &tol()).unwrap();
        prop_assert!(ext.consistency < 1e-9);
        prop_assert!(case_two_splitting_residual(&ext, &tol()).unwrap() < 1e-9);
    }

    #[test]
    fn lifting_char_is_invariant_under_a_rotation(seed in any::<u64>(), m_a in 1usize..=3) {
        let mut rng = seeded(seed);
        let l = reduced_lifting(&mut rng, 2, 1, m_a, &tol()).unwrap();
        let u = unitary(&mut rng, m_a);
        let lu = l.rotate_a(&u, &tol()).unwrap();
        let th = lifting_char(&l, 3, false, &tol()).unwrap().symbol;
        let thu = lifting_char(&lu, 3, false, &tol()).unwrap().symbol;
        prop_assert!(equivalent(&th, &thu, 1e-8).equivalent);
    }

    #[test]
    fn files_roundtrip_exactly(seed in any::<u64>(), m_c in 1usize..=2, m_a in 1usize..=2) {
        let mut rng = seeded(seed);
        let l = reduced_lifting(&mut rng, 2, m_c, m_a, &tol()).unwrap();
        let tf = TupleFile::from_tuple(&l.total());
        let text = to_json_string(&serde_json::to_value(&tf).unwrap());
        let back: TupleFile = parse_json(&text, "tuple").unwrap();
        prop_assert_eq!(back.to_tuple().unwrap().mats, l.total().mats);

        let lf = LiftingFile::from_lifting(&l);
        let text = to_json_string(&serde_json::to_value(&lf).unwrap());
        let back: LiftingFile = parse_json(&text, "lifting").unwrap();
        let (c, a, b) = back.to_blocks().unwrap();
        prop_assert_eq!((c.mats, a.mats, b), (l.c.mats.clone(), l.a.mats.clone(), l.b.clone()));

        let th = lifting_char(&l, 2, false, &tol()).unwrap().symbol;
        let sf = SymbolFile::from_symbol(&th, 0.0);
        let text = to_json_string(&serde_json::to_value(&sf).unwrap());
        let back: SymbolFile = parse_json(&text, "symbol").unwrap();
        prop_assert_eq!(back.to_symbol().unwrap().coeffs, th.coeffs);
    }

    #[test]
    fn floats_roundtrip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = format_float(x).parse().unwrap();
        prop_assert_eq!(back, if x == 0.0 { 0.0 } else { x });
    }

    #[test]
    fn words_roundtrip(letters in proptest::collection::vec(1u8..=9, 0..6)) {
        let w = Word::new(&letters);
        let back: Word = w.to_string().parse().unwrap();
        prop_assert_eq!(&back, &w);
        let f = TruncatedFock::new(9, letters.len());
        prop_assert_eq!(f.word(f.index(&w)), w);
    }
}
