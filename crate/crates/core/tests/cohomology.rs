mod common;

use common::TameQuotient;
use ramify_core::tame::{classify, cocycle_space, ClassKind, Cocycle, TameModel};

fn as_pair(c: &Cocycle) -> ([u64; 3], [u64; 3]) {
    let v = c.to_vector();
    ([v[0], v[1], v[2]], [v[3], v[4], v[5]])
}

#[test]
fn library_basis_consists_of_cocycles() {
    for (p, l) in [(5, 7), (7, 23), (11, 13), (13, 41)] {
        let q = TameQuotient::new(p);
        let space = cocycle_space(&TameModel::new(p, l).unwrap()).unwrap();
        for c in space.z1_basis.iter().chain(&space.b1_basis).chain(&space.h1_basis) {
            let (s, t) = as_pair(c);
            assert!(q.is_cocycle(s, t), "p={p}: {s:?} {t:?}");
        }
    }
}

#[test]
fn non_cocycles_are_rejected_by_both() {
    let q = TameQuotient::new(5);
    let model = TameModel::new(5, 7).unwrap();
    // f(τ) off the upper-right entry violates the relation.
    assert!(!q.is_cocycle([0, 0, 0], [1, 0, 0]));
    let bad = Cocycle::from_coords(5, [0, 0, 0], [1, 0, 0]).unwrap();
    assert!(bad.check(&model).is_err());
}

#[test]
fn every_oracle_cocycle_is_classified() {
    let p = 5;
    let q = TameQuotient::new(p);
    let model = TameModel::new(p, 7).unwrap();
    let mut kinds = [0usize; 4];
    for code in 0..p.pow(6) {
        let mut c = code;
        let mut d = [0i64; 6];
        for x in &mut d {
            *x = (c % p) as i64;
            c /= p;
        }
        let (s, t) = ([d[0] as u64, d[1] as u64, d[2] as u64], [d[3] as u64, d[4] as u64, d[5] as u64]);
        let lib = Cocycle::from_coords(p, [d[0], d[1], d[2]], [d[3], d[4], d[5]]).unwrap();
        assert_eq!(q.is_cocycle(s, t), lib.check(&model).is_ok(), "{d:?}");
        if q.is_cocycle(s, t) {
            let k = classify(&lib, &model).unwrap().kind;
            kinds[match k {
                ClassKind::Coboundary => 0,
                ClassKind::Unramified => 1,
                ClassKind::Null => 2,
                ClassKind::Mixed => 3,
            }] += 1;
        }
    }
    // |B¹| = 25 in each of the 25 classes of H¹.
    assert_eq!(kinds, [25, 4 * 25, 4 * 25, 16 * 25]);
}
