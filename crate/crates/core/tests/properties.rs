use proptest::prelude::*;

use ramify_core::analytic::{logint, lo_bound};
use ramify_core::groups::{SemidirectGroup, Variant};
use ramify_core::lifter::{from_jsonl, generate_model, run, to_jsonl, verify_chain, GeneratorConfig, GlobalModel};
use ramify_core::linalg::in_span;
use ramify_core::localdims::{subspace_decompose, SubspaceDecompositionProblem};
use ramify_core::tame::{act, check_relation, classify, normalize_to_special, Cocycle, LocalRep, TameModel};
use ramify_core::zmod::{teichmuller, Mat2, Modulus, TraceZeroMat};

fn model5() -> TameModel {
    TameModel::new(5, 7).unwrap()
}

fn class(model: &TameModel, a: u64, b: u64, m: [i64; 3]) -> Cocycle {
    let p = model.p();
    let mat = TraceZeroMat::from_coords(model.field(), m[0], m[1], m[2]);
    Cocycle::unramified(p).unwrap().scale(a) + Cocycle::null(p).unwrap().scale(b) + Cocycle::coboundary(model, &mat).unwrap()
}

proptest! {
    #[test]
    fn residue_ring_laws(level in 1u32..8, a in any::<i64>(), b in any::<i64>(), c in any::<i64>()) {
        let m = Modulus::new(5, level).unwrap();
        let (a, b, c) = (m.residue(a % 1_000_000), m.residue(b % 1_000_000), m.residue(c % 1_000_000));
        prop_assert_eq!(a * (b + c), a * b + a * c);
        prop_assert_eq!((a - b) + b, a);
        if a.is_unit() {
            prop_assert_eq!(a * a.inverse().unwrap(), m.one());
        }
    }

    #[test]
    fn reduction_is_a_ring_map(level in 2u32..8, e in proptest::array::uniform4(0i64..100_000), f in proptest::array::uniform4(0i64..100_000)) {
        let m = Modulus::new(7, level).unwrap();
        let (x, y) = (Mat2::new(m, e), Mat2::new(m, f));
        let r = level - 1;
        prop_assert_eq!((x * y).reduce(r).unwrap(), x.reduce(r).unwrap() * y.reduce(r).unwrap());
        prop_assert_eq!((x + y).reduce(r).unwrap(), x.reduce(r).unwrap() + y.reduce(r).unwrap());
        if x.is_invertible() {
            prop_assert!((x * x.inverse().unwrap()).is_identity());
        }
    }

    #[test]
    fn teichmuller_is_a_root_of_unity_lift(a in 1i64..5, level in 1u32..8) {
        let t = teichmuller(a, 5, level).unwrap();
        prop_assert_eq!(t.pow(4), t.modulus().one());
        prop_assert_eq!(t.reduce(1).unwrap().value(), a as u64);
    }

    #[test]
    fn classification_recovers_coefficients(a in 0u64..5, b in 0u64..5, m in proptest::array::uniform3(0i64..5)) {
        let md = model5();
        let c = classify(&class(&md, a, b, m), &md).unwrap();
        prop_assert_eq!((c.a, c.b), (a, b));
    }

    #[test]
    fn action_preserves_relation_and_determinants(
        level in 2u32..7,
        k in 0u64..10_000,
        a in 0u64..5,
        b in 0u64..5,
        m in proptest::array::uniform3(0i64..5),
    ) {
        let md = model5();
        let modulus = Modulus::new(5, level).unwrap();
        let u = 5 * (k % (modulus.modulus() / 5));
        let rep = LocalRep::special(md, level, u as i64).unwrap();
        let moved = act(&class(&md, a, b, m), &rep, level - 1).unwrap();
        prop_assert!(check_relation(&moved));
        prop_assert!(moved.determinants_ok());
        prop_assert_eq!(moved.reduce(level - 1).unwrap(), rep.reduce(level - 1).unwrap());
    }

    #[test]
    fn coboundary_action_keeps_specialness(level in 2u32..7, k in 0u64..10_000, m in proptest::array::uniform3(0i64..5)) {
        let md = model5();
        let modulus = Modulus::new(5, level).unwrap();
        let u = 5 * (k % (modulus.modulus() / 5));
        let rep = LocalRep::special(md, level, u as i64).unwrap();
        let moved = act(&class(&md, 0, 0, m), &rep, level - 1).unwrap();
        prop_assert!(normalize_to_special(&moved).unwrap().is_special());
    }

    #[test]
    fn decomposition_reassembles(target in proptest::collection::vec(0u64..7, 3), w in proptest::collection::vec(0u64..7, 3)) {
        let u = vec![vec![1, 0, 0], vec![0, 1, 0]];
        prop_assume!(w[2] != 0);
        let problem = SubspaceDecompositionProblem { p: 7, ambient: 3, u_basis: u.clone(), w_basis: vec![w.clone()], target: target.clone() };
        let d = subspace_decompose(&problem).unwrap();
        let sum: Vec<u64> = d.u_part.iter().zip(&d.w_part).map(|(x, y)| (x + y) % 7).collect();
        prop_assert_eq!(sum, target);
        prop_assert!(in_span(7, 3, &u, &d.u_part));
        prop_assert!(in_span(7, 3, &[w], &d.w_part));
    }

    #[test]
    fn semidirect_group_laws(
        n1 in proptest::collection::vec(proptest::array::uniform3(0i64..5), 2),
        n2 in proptest::collection::vec(proptest::array::uniform3(0i64..5), 2),
        n3 in proptest::collection::vec(proptest::array::uniform3(0i64..5), 2),
        c in proptest::collection::vec(proptest::array::uniform4(0i64..25), 3),
    ) {
        let g = SemidirectGroup::new(5, 2, 2).unwrap();
        let cm = g.c_modulus();
        let mats: Vec<Mat2> = c.iter().map(|e| Mat2::new(cm, *e)).collect();
        prop_assume!(mats.iter().all(Mat2::is_invertible));
        let elt = |n: &Vec<[i64; 3]>, c: Mat2| {
            g.element(n.iter().map(|v| TraceZeroMat::from_coords(g.field(), v[0], v[1], v[2])).collect(), c).unwrap()
        };
        let (x, y, z) = (elt(&n1, mats[0]), elt(&n2, mats[1]), elt(&n3, mats[2]));
        prop_assert_eq!(g.mul(&g.mul(&x, &y), &z), g.mul(&x, &g.mul(&y, &z)));
        prop_assert!(g.is_identity(&g.mul(&x, &g.inverse(&x))));
    }

    #[test]
    fn logint_is_increasing_with_derivative_one_over_log(x in 3.0f64..1e9) {
        let h = x * 1e-4;
        let (a, b) = (logint(x).unwrap(), logint(x + h).unwrap());
        prop_assert!(b > a);
        let slope = (b - a) / h;
        prop_assert!((slope * x.ln() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn lo_bound_is_monotone(x in 10.0f64..1e12, r in 0.001f64..1.0, n1 in 1.0f64..100.0, dn in 0.0f64..100.0) {
        let a = lo_bound(x, r, 5.0, n1, 1.0).unwrap();
        let b = lo_bound(x, r, 5.0, n1 + dn, 1.0).unwrap();
        prop_assert!(b >= a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_models_lift_and_verify(seed in any::<u64>(), grh in any::<bool>(), stages in 1u32..4) {
        let variant = if grh { Variant::Grh } else { Variant::Unconditional };
        let raw = generate_model(&GeneratorConfig::new(5, stages + 3, variant, stages, seed)).unwrap();
        let reparsed = GlobalModel::from_json(&raw.to_json_pretty()).unwrap();
        prop_assert_eq!(&reparsed, &raw);
        let model = raw.validate().unwrap();
        let out = run(&model, stages).unwrap();
        let report = verify_chain(&out.trace);
        prop_assert!(report.is_ok(), "{:?}", report.violations);
        prop_assert_eq!(from_jsonl(&to_jsonl(&out.trace)).unwrap(), out.trace);
    }

    #[test]
    fn other_primes_lift_and_verify(seed in any::<u64>(), grh in any::<bool>(), p in prop::sample::select(vec![7u64, 11, 13])) {
        let variant = if grh { Variant::Grh } else { Variant::Unconditional };
        let model = generate_model(&GeneratorConfig::new(p, 4, variant, 2, seed)).unwrap().validate().unwrap();
        let out = run(&model, 2).unwrap();
        prop_assert!(verify_chain(&out.trace).is_ok());
    }
}
