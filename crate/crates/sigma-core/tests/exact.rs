use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigma_core::difference::twisted_pair_presentation;
use sigma_core::rat::{frac, rat};
use sigma_core::systems::random_polynomial;
use sigma_core::{Element, Presentation, RatFunc, VarId};

/// `g` free, `a1`, `a2` the twisted pair.
fn three_gen() -> Presentation {
    twisted_pair_presentation()
}

fn vars(p: &Presentation) -> Vec<VarId> {
    let mut out = Vec::new();
    for g in p.generators() {
        if g.is_free() {
            out.extend((-1..=2).map(|s| VarId::new(g.id, s)));
        } else {
            out.push(VarId::new(g.id, 0));
        }
    }
    out
}

fn random_element(p: &Presentation, rng: &mut ChaCha8Rng) -> Element {
    let v = vars(p);
    let num = random_polynomial(rng, &v, 2, 3);
    if rng.gen_bool(0.5) {
        return num;
    }
    loop {
        let den = random_polynomial(rng, &v, 1, 2);
        if !den.is_zero() {
            return num.div(&den).unwrap();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_laws(seed in any::<u64>()) {
        let p = three_gen();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y, z) = (random_element(&p, &mut rng), random_element(&p, &mut rng), random_element(&p, &mut rng));
        prop_assert_eq!(x.add(&y), y.add(&x));
        prop_assert_eq!(x.mul(&y), y.mul(&x));
        prop_assert_eq!(x.mul(&y.add(&z)), x.mul(&y).add(&x.mul(&z)));
        prop_assert_eq!(x.add(&y).add(&z), x.add(&y.add(&z)));
        prop_assert!(x.sub(&x).is_zero());
        if !x.is_zero() {
            prop_assert!(x.mul(&x.inv().unwrap()).is_one());
        }
    }

    #[test]
    fn sigma_is_a_ring_automorphism(seed in any::<u64>(), k in 1i64..=3) {
        let p = three_gen();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_element(&p, &mut rng);
        let y = random_element(&p, &mut rng);
        prop_assert_eq!(p.sigma(&x.mul(&y), 1), p.sigma(&x, 1).mul(&p.sigma(&y, 1)));
        prop_assert_eq!(p.sigma(&x.add(&y), 1), p.sigma(&x, 1).add(&p.sigma(&y, 1)));
        prop_assert_eq!(p.sigma(&p.sigma(&x, k), -k), x.clone());
        prop_assert_eq!(p.sigma_inv(&p.sigma(&x, 1)), x);
    }

    #[test]
    fn wp_zero_iff_fixed(seed in any::<u64>()) {
        let p = three_gen();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Mix in constants so both outcomes occur.
        let x = if rng.gen_bool(0.3) { RatFunc::constant(frac(rng.gen_range(-9..9), rng.gen_range(1..5))) } else { random_element(&p, &mut rng) };
        prop_assert_eq!(p.wp(&x).is_zero(), p.is_fixed(&x));
    }
}

#[test]
fn twisted_pair_identities() {
    let p = three_gen();
    let (g, a1, a2) = (p.el("g"), p.el("a1"), p.el("a2"));
    assert!(p.wp(&RatFunc::constant(frac(7, 3))).is_zero());
    assert!(!p.is_fixed(&g));
    assert_eq!(p.wp(&a1), g.sub(&RatFunc::one()).mul(&a1).add(&g));
    assert_eq!(p.wp(&a1.mul(&a2)), a1.add(&a2).add(&RatFunc::one()));
    assert_eq!(p.sigma(&a2, 1), a2.add(&RatFunc::one()).div(&g).unwrap());
}

#[test]
fn negative_shift_of_affine_generator() {
    let p = three_gen();
    let a1 = p.el("a1");
    // σ⁻¹(a1) = (a1 − g[-1]) / g[-1].
    let gm = RatFunc::var(VarId::new(p.id_of("g").unwrap(), -1));
    assert_eq!(p.sigma(&a1, -1), a1.sub(&gm).div(&gm).unwrap());
    assert_eq!(p.sigma(&RatFunc::constant(rat(5)), -3), RatFunc::constant(rat(5)));
}
