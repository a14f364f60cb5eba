use std::collections::BTreeSet;

use sigma_core::counterexample::*;
use sigma_core::sas::{certify_unsolvable, solve_twisted_bounded, Equation, SearchBounds, SolveResult, TwistedSas};
use sigma_core::systems::fixed_spanning_set;
use sigma_core::{Presentation, RatFunc};

fn pair() -> (Presentation, AvoidedRegistry) {
    let (e0, r0) = build_base().unwrap();
    let (e1, r1) = closure_step(&e0, &r0, &RatFunc::one()).unwrap();
    (adjoin_twisted_pair(&e1, &r1).unwrap(), r1)
}

#[test]
fn pipeline_and_control_disagree() {
    let bounds = SearchBounds { degree: 4, window: 3 };
    let rep = verify_counterexample(bounds, SearchBounds { degree: 6, window: 4 }, 1);
    assert_eq!(rep.verdict, VERDICT_REFUTED);
    assert!(rep.certificate_chain.iter().all(|s| s.checked));
    assert!(rep.identity_checks.iter().all(|c| c.holds));
    let ctl = verify_control(bounds, 1);
    assert_eq!(ctl.verdict, VERDICT_DECOMPOSABLE);
    assert!(ctl.certificate_chain.iter().any(|s| !s.checked));
}

#[test]
fn five_closure_steps_keep_registry_certified() {
    let (mut p, mut reg) = build_base().unwrap();
    let g = p.el("g");
    let targets = [RatFunc::one(), g.clone(), g.mul(&g), RatFunc::int(2), p.sigma(&g, 1)];
    for f in targets {
        let (q, r) = closure_step(&p, &reg, &f).unwrap();
        let t = q.generators().last().unwrap().name.clone();
        assert_eq!(q.wp(&q.el(&t)), f);
        r.replay().unwrap();
        for fam in &r.families {
            assert!(r.lookup(&q, &fam.goal).is_some(), "{}", fam.label);
        }
        (p, reg) = (q, r);
    }
    assert_eq!(p.generators().len(), 6);
}

#[test]
fn twisted_torsors_refuted_with_case_equations() {
    let (p, reg) = pair();
    let bounds = SearchBounds { degree: 6, window: 4 };
    let r1 = verify_no_torsor_over_twisted(&p, &reg, Which::A1, bounds).unwrap();
    assert!(r1.derived.contains(&"s(y) - (1/g)*y = 1/g".to_string()), "{:?}", r1.derived);
    assert!(r1.derived.iter().any(|d| d.starts_with("s(y)/y = g^")), "{:?}", r1.derived);
    let r2 = verify_no_torsor_over_twisted(&p, &reg, Which::A2, bounds).unwrap();
    assert!(r2.derived.contains(&"s(y) - g*y = g".to_string()), "{:?}", r2.derived);
    let over: BTreeSet<u32> = ["g", "t", "a1"].iter().map(|n| p.id_of(n).unwrap()).collect();
    let e_a1 = p.restrict(&over).unwrap();
    r1.certificate.replay(&e_a1, Some(&reg)).unwrap();
}

#[test]
fn product_identity_and_its_perturbation() {
    let (p, _) = pair();
    assert!(verify_product_identity(&p));
    let mut q = Presentation::new();
    q.add_free("g").unwrap();
    let g = q.el("g");
    let gi = g.inv().unwrap();
    q.add_affine("a1", g.clone(), g).unwrap();
    q.add_affine("a2", gi, RatFunc::zero()).unwrap();
    assert!(!verify_product_identity(&q));
    // a1·a2 − t realises the torsor of a1 + a2.
    let x = p.el("a1").mul(&p.el("a2")).sub(&p.el("t"));
    assert_eq!(p.wp(&x), p.el("a1").add(&p.el("a2")));
}

#[test]
fn height4_instance_is_well_formed() {
    let (p, _) = pair();
    let inst = build_height4_instance(&p).unwrap();
    assert!(inst.all_checks_hold());
    let m = &inst.model;
    let f = &inst.equation.summands;
    assert!(f.iter().fold(RatFunc::zero(), |a, b| a.add(b)).is_zero());
    for (i, x) in f.iter().enumerate() {
        assert!(m.presentation().is_fixed(x));
        assert!(m.corner(&m.hat(&[i])).contains(x));
    }
    assert!(!inst.modeling.is_empty());
}

#[test]
fn corner_34_has_only_constant_fixed_elements() {
    let (p, _) = pair();
    let inst = build_height4_instance(&p).unwrap();
    let m = &inst.model;
    let c = m.corner(&m.hat(&[0, 1]));
    let span = fixed_spanning_set(&c, SearchBounds { degree: 4, window: 3 });
    assert_eq!(span.len(), 1);
    assert!(span[0].is_constant());
}

#[test]
fn base_sanity_guard() {
    let (p, reg) = build_base().unwrap();
    let g = p.el("g");
    let eq = TwistedSas::torsor(p.sigma(&g, 1).sub(&g));
    let sol = solve_twisted_bounded(&p, &eq, SearchBounds { degree: 1, window: 1 }).unwrap();
    assert!(matches!(sol, SolveResult::Solution(_)));
    assert!(certify_unsolvable(&p, &Equation::Twisted(eq), Some(&reg)).certificate().is_none());
}
