use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigma_core::counterexample::{adjoin_twisted_pair, build_base, build_height4_instance, closure_step};
use sigma_core::rat::rat;
use sigma_core::sas::{certify_unsolvable, Equation, SearchBounds, TwistedSas};
use sigma_core::systems::*;
use sigma_core::{GenKind, Presentation, RatFunc};

fn free_system(n: usize, base_gens: usize) -> SystemModel {
    let mut base = Presentation::new();
    for k in 0..base_gens {
        base.add_free(&format!("e{k}")).unwrap();
    }
    let blocks = (1..=n)
        .map(|i| vec![(format!("x{i}"), GenKind::Free), (format!("y{i}"), GenKind::Free)])
        .collect();
    build_system(base, blocks).unwrap()
}

fn torsor_system(n: usize) -> SystemModel {
    let mut base = Presentation::new();
    base.add_affine("t", RatFunc::one(), RatFunc::one()).unwrap();
    let one = || GenKind::Affine { linear: RatFunc::one(), constant: RatFunc::one() };
    let blocks = (1..=n).map(|i| vec![(format!("u{i}"), one())]).collect();
    build_system(base, blocks).unwrap()
}

/// Fixed pieces built from `u_k − t` and `(u_k − t)(u_l − t)`.
fn planted_ff(m: &SystemModel, seed: u64) -> AdditiveEquation {
    let p = m.presentation();
    let t = p.el("t");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m.n();
    let mut c = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let fs: Vec<_> = m.hat(&[i, j]).into_iter().map(|k| p.el(&format!("u{}", k + 1)).sub(&t)).collect();
            let mut v = RatFunc::int(rng.gen_range(-3..=3));
            for f in &fs {
                v = v.add(&f.scale(&rat(rng.gen_range(-2..=2))));
            }
            if fs.len() >= 2 && rng.gen_bool(0.5) {
                v = v.add(&fs[0].mul(&fs[1]));
            }
            c.insert((j, i), v.neg());
            c.insert((i, j), v);
        }
    }
    let summands = (0..n).map(|i| (0..n).filter(|&j| j != i).fold(RatFunc::zero(), |a, j| a.add(&c[&(i, j)]))).collect();
    AdditiveEquation::new(m, summands).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planted_cocycles_decompose(n in 3usize..=5, seed in any::<u64>(), pseed in any::<u64>()) {
        let m = free_system(n, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (eq, _) = planted_equation(&m, &mut rng);
        let dec = decompose(&m, &eq, &mut GenericPoints::new(pseed)).unwrap();
        let v = validate_decomposition(&m, &eq, &dec);
        prop_assert!(v.valid, "{:?}", v.diagnostics);
    }

    #[test]
    fn restriction_matches_corners(n in 2usize..=5, i in 0usize..5, w in proptest::collection::btree_set(0usize..4, 0..4)) {
        let i = i % n;
        let m = free_system(n, 1);
        let r = m.restrict_over_corner(i);
        let w: BTreeSet<usize> = w.into_iter().filter(|&k| k < n - 1).collect();
        let mut orig: BTreeSet<usize> = w.iter().map(|&k| if k >= i { k + 1 } else { k }).collect();
        orig.insert(i);
        prop_assert_eq!(r.corner_ids(&w), m.corner_ids(&orig));
    }
}

#[test]
fn validation_reports_each_failure() {
    let m = free_system(3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (eq, dec) = planted_equation(&m, &mut rng);
    let p = m.presentation();
    let mut bad = dec.clone();
    let x1 = p.el("x1");
    bad.c.insert((0, 1), dec.get(0, 1).add(&x1));
    bad.c.insert((0, 2), dec.get(0, 2).sub(&x1));
    let v = validate_decomposition(&m, &eq, &bad);
    assert!(v.diagnostics.iter().any(|d| d.starts_with("membership")));
    assert!(v.diagnostics.iter().any(|d| d.starts_with("antisymmetry")));
    let mut bad = dec;
    bad.c.insert((1, 0), bad.get(1, 0).add(&RatFunc::one()));
    let v = validate_decomposition(&m, &eq, &bad);
    assert!(v.diagnostics.iter().any(|d| d.starts_with("recovery")));
}

#[test]
fn arity_and_membership_errors() {
    let m = free_system(3, 1);
    let p = m.presentation();
    assert_eq!(
        AdditiveEquation::new(&m, vec![RatFunc::zero(); 2]).unwrap_err(),
        SystemError::Arity { expected: 3, got: 2 }
    );
    let x1 = p.el("x1");
    let err = AdditiveEquation::new(&m, vec![x1.clone(), x1.neg(), RatFunc::zero()]).unwrap_err();
    assert_eq!(err, SystemError::Membership(1));
    let err = AdditiveEquation::new(&m, vec![RatFunc::zero(), RatFunc::one(), RatFunc::zero()]).unwrap_err();
    assert_eq!(err, SystemError::NonzeroSum);
}

#[test]
fn witness_driven_with_closure_steps() {
    for (n, seeds) in [(3usize, 0..10u64), (4, 10..20)] {
        for seed in seeds {
            let mut m = torsor_system(n);
            let eq = planted_ff(&m, seed);
            let mut oracle = SearchOracle { bounds: SearchBounds { degree: 2, window: 0 } };
            let (dec, _closures) = ff_decompose_with_closure(&mut m, &eq, &mut oracle, seed, 16).unwrap();
            let v = validate_decomposition(&m, &eq, &dec);
            assert!(v.valid, "{:?}", v.diagnostics);
            assert!(dec.c.values().all(|x| m.presentation().is_fixed(x)));
        }
    }
}

#[test]
fn closure_adjoins_when_oracle_refuses() {
    let mut m = torsor_system(3);
    let eq = planted_ff(&m, 3);
    let mut never = |_: &Presentation, _: &RatFunc| None;
    let (dec, closures) = ff_decompose_with_closure(&mut m, &eq, &mut never, 3, 32).unwrap();
    assert!(!closures.is_empty());
    assert!(validate_decomposition(&m, &eq, &dec).valid);
}

#[test]
fn f_equation_blocks_on_avoided_torsor() {
    let (e0, r0) = build_base().unwrap();
    let (e1, r1) = closure_step(&e0, &r0, &RatFunc::one()).unwrap();
    let p = adjoin_twisted_pair(&e1, &r1).unwrap();
    let inst = build_height4_instance(&p).unwrap();
    let mut oracle = SearchOracle { bounds: SearchBounds { degree: 2, window: 1 } };
    let err = ff_decompose_with_witnesses(&inst.model, &inst.equation, &mut oracle, &mut GenericPoints::new(1)).unwrap_err();
    let SystemError::WitnessUnavailable { raw, corner, .. } = err else {
        panic!("expected a blocked query, got {err:?}");
    };
    let corner = inst.model.presentation().restrict(&corner).unwrap();
    let eq = Equation::Twisted(TwistedSas::torsor(raw));
    assert!(certify_unsolvable(&corner, &eq, Some(&r1)).certificate().is_some());
}
