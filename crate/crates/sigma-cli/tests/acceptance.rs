//! Acceptance run: one PASS/FAIL line per criterion, with wall-clock budgets.
//!
//! Run alone with `cargo test -p sigma-cli --test acceptance`.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigma_cli::{run, Command, Job, EXIT_OK};
use sigma_core::amalgamation::*;
use sigma_core::counterexample::*;
use sigma_core::difference::twisted_pair_presentation;
use sigma_core::rat::{frac, rat};
use sigma_core::sas::*;
use sigma_core::systems::*;
use sigma_core::{CircleValue, Element, GenKind, Presentation, RatFunc, VarId};

type Check = fn() -> Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cv(a: i64, b: i64) -> CircleValue {
    CircleValue::new(frac(a, b))
}

fn twisted_pair() -> (Presentation, AvoidedRegistry) {
    let (e0, r0) = build_base().unwrap();
    let (e1, r1) = closure_step(&e0, &r0, &RatFunc::one()).unwrap();
    (adjoin_twisted_pair(&e1, &r1).unwrap(), r1)
}

fn product_identity() -> Result<(), String> {
    let p = twisted_pair_presentation();
    let (a1, a2) = (p.el("a1"), p.el("a2"));
    let lhs = p.wp(&a1.mul(&a2));
    let rhs = a1.add(&a2).add(&RatFunc::one());
    ensure(lhs == rhs, || format!("wp(a1*a2) = {}", p.fmt(&lhs)))
}

fn decomposition_suite() -> Result<(), String> {
    let mut ok = 0;
    for n in 3..=5usize {
        let mut base = Presentation::new();
        base.add_free("e0").unwrap();
        let blocks = (1..=n)
            .map(|i| vec![(format!("x{i}"), GenKind::Free), (format!("y{i}"), GenKind::Free)])
            .collect();
        let m = build_system(base, blocks).unwrap();
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * n as u64 + seed);
            let (eq, _) = planted_equation(&m, &mut rng);
            let dec = decompose(&m, &eq, &mut GenericPoints::new(seed)).map_err(|e| format!("n={n} seed={seed}: {e}"))?;
            let v = validate_decomposition(&m, &eq, &dec);
            ensure(v.valid, || format!("n={n} seed={seed}: {:?}", v.diagnostics))?;
            ok += 1;
        }
    }
    ensure(ok == 150, || format!("{ok}/150"))
}

fn random_element(p: &Presentation, rng: &mut ChaCha8Rng) -> Element {
    let mut vars = Vec::new();
    for g in p.generators() {
        if g.is_free() {
            vars.extend((-1..=2).map(|s| VarId::new(g.id, s)));
        } else {
            vars.push(VarId::new(g.id, 0));
        }
    }
    let num = random_polynomial(rng, &vars, 2, 3);
    if rng.gen_bool(0.5) {
        return num;
    }
    loop {
        let den = random_polynomial(rng, &vars, 1, 2);
        if !den.is_zero() {
            return num.div(&den).unwrap();
        }
    }
}

fn automorphism_laws() -> Result<(), String> {
    let p = twisted_pair_presentation();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..200 {
        let x = random_element(&p, &mut rng);
        let y = random_element(&p, &mut rng);
        let hom = p.sigma(&x.mul(&y), 1) == p.sigma(&x, 1).mul(&p.sigma(&y, 1))
            && p.sigma(&x.add(&y), 1) == p.sigma(&x, 1).add(&p.sigma(&y, 1));
        let inv = p.sigma_inv(&p.sigma(&x, 1)) == x && p.sigma(&p.sigma_inv(&y), 1) == y;
        ensure(hom && inv, || format!("pair {k}: x = {}, y = {}", p.fmt(&x), p.fmt(&y)))?;
    }
    Ok(())
}

fn free_base_decisions() -> Result<(), String> {
    let mut p = Presentation::new();
    p.add_free("g").unwrap();
    let g = p.el("g");
    let gi = g.inv().unwrap();
    let mut refuted = Vec::new();
    for z in [-3, -2, -1, 1, 2, 3] {
        refuted.push(Equation::Multiplicative(MultiplicativeSas::new(g.clone(), z).unwrap()));
    }
    refuted.push(Equation::Twisted(TwistedSas::new(g.clone(), g.clone()).unwrap()));
    refuted.push(Equation::Twisted(TwistedSas::new(gi.clone(), gi).unwrap()));
    for eq in &refuted {
        match decide_free_base(&p, eq).map_err(|e| e.to_string())? {
            FreeBaseDecision::Unsolvable(c) => c.replay(&p, None).map_err(|e| format!("{}: {e}", eq.display(&p)))?,
            other => return Err(format!("{}: {other:?}", eq.display(&p))),
        }
    }
    let telescoping = TwistedSas::torsor(p.sigma(&g, 1).sub(&g));
    match decide_free_base(&p, &Equation::Twisted(telescoping.clone())).map_err(|e| e.to_string())? {
        FreeBaseDecision::Solvable(x) => {
            ensure(x == g && telescoping.is_solution(&p, &x), || format!("witness {}", p.fmt(&x)))
        }
        other => Err(format!("telescoping: {other:?}")),
    }
}

fn twisted_pair_torsor() -> Result<(), String> {
    let (p, reg) = twisted_pair();
    let r = verify_no_torsor_over_twisted(&p, &reg, Which::A1, SearchBounds { degree: 6, window: 4 }).map_err(|e| e.to_string())?;
    ensure(r.derived.iter().any(|d| d.starts_with("s(y)/y = g^")), || format!("{:?}", r.derived))?;
    ensure(r.derived.contains(&"s(y) - (1/g)*y = 1/g".to_string()), || format!("{:?}", r.derived))?;
    ensure(r.bounded == "NoSolutionWithinBounds", || r.bounded.clone())
}

fn counterexample_pipeline() -> Result<(), String> {
    let out = run(&Job::new(Command::VerifyCounterexample, None)).map_err(|e| e.to_string())?;
    ensure(out.exit_code == EXIT_OK, || format!("exit {}", out.exit_code))?;
    ensure(out.report.verdict == VERDICT_REFUTED, || out.report.verdict.clone())?;
    let rep = &out.report.details["report"];
    let chain = rep["certificate_chain"].as_array().ok_or("no chain")?;
    ensure(!chain.is_empty() && chain.iter().all(|s| s["checked"] == true), || format!("{chain:?}"))?;
    let ids = rep["identity_checks"].as_array().ok_or("no identity checks")?;
    ensure(ids.iter().all(|c| c["holds"] == true), || format!("{ids:?}"))?;
    let ff = rep["bounded_searches"]
        .as_array()
        .and_then(|b| b.iter().find(|s| s["search"].as_str().is_some_and(|n| n.starts_with("ff_decompose_bounded"))))
        .ok_or("no bounded ff search")?;
    ensure(ff["outcome"] == "NotFoundWithinBounds", || format!("{ff}"))?;
    ensure(ff["bounds"]["degree"] == 4 && ff["bounds"]["window"] == 3, || format!("{ff}"))?;
    let ctl = &out.report.details["control"]["verdict"];
    ensure(ctl == VERDICT_DECOMPOSABLE, || format!("control: {ctl}"))
}

fn character_oracle() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for k in 0..100 {
        let dim = rng.gen_range(1..=5);
        let inst = random_character_instance(&mut rng, dim);
        let angles: Vec<CircleValue> = inst.table.entries().iter().map(|(_, v)| v.clone()).collect();
        let brute = brute_force_consistent(&inst.coords, &angles, 2);
        ensure(inst.table.is_consistent() == brute, || format!("instance {k}: {:?}", inst.table.describe()))?;
    }
    Ok(())
}

fn three_amalgamation() -> Result<(), String> {
    let mut p = Presentation::new();
    p.add_free("g").unwrap();
    let g = p.el("g");
    let (_, reg) = build_base().unwrap();
    let build = |r| build_3amalg_obstruction(&p, &g, r, Some(&reg)).map_err(|e| e.to_string());
    ensure(build([cv(1, 3), cv(2, 3), cv(1, 3)])?.verdict.is_solvable(), || "(1/3, 2/3, 1/3) blocked".into())?;
    ensure(!build([cv(1, 2), cv(0, 1), cv(1, 3)])?.verdict.is_solvable(), || "(1/2, 0, 1/3) solvable".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let r: [CircleValue; 3] = std::array::from_fn(|_| cv(rng.gen_range(0..12), 12));
        let predicate = r[0].add(&r[2]).add(&r[1].neg()).is_zero();
        let inst = build(r.clone())?;
        ensure(inst.verdict.is_solvable() == predicate, || format!("{r:?}"))?;
    }
    Ok(())
}

fn coefficients_from_roots(roots: &[Element]) -> Vec<Element> {
    let mut c = vec![RatFunc::one()];
    for r in roots {
        let mut next = vec![RatFunc::zero(); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] = next[i].add(ci);
            next[i + 1] = next[i + 1].sub(&ci.mul(r));
        }
        c = next;
    }
    c.remove(0);
    c
}

fn descent() -> Result<(), String> {
    let mut p = Presentation::new();
    p.add_free("g").unwrap();
    let g = p.el("g");
    let vars = [VarId::new(0, 0), VarId::new(0, 1)];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let twists = [RatFunc::one(), RatFunc::constant(frac(2, 3)), g.clone(), g.inv().unwrap()];
    for k in 0..50 {
        let x0 = random_polynomial(&mut rng, &vars, 2, 2);
        let e1 = twists[k % 4].clone();
        let e2 = p.sigma(&x0, 1).sub(&e1.mul(&x0));
        let n = rng.gen_range(1..=3);
        let mut offs: Vec<Element> = (1..n).map(|_| RatFunc::int(rng.gen_range(-4..=4))).collect();
        let total = offs.iter().fold(RatFunc::zero(), |a, b| a.add(b));
        offs.push(total.neg());
        let roots: Vec<Element> = offs.iter().map(|r| x0.add(r)).collect();
        let x = descent_linear(&p, &coefficients_from_roots(&roots), &e1, &e2).map_err(|e| format!("linear {k}: {e}"))?;
        let eq = TwistedSas::new(e1, e2).unwrap();
        ensure(eq.is_solution(&p, &x), || format!("linear {k}: {}", p.fmt(&x)))?;
    }
    for k in 0..50 {
        let h = random_polynomial(&mut rng, &vars, 1, 2).add(&g.mul(&g));
        let e = p.sigma(&h, 1).div(&h).unwrap();
        let z = [-2i64, -1, 1, 2][k % 4];
        let deg = 1 + k % 3;
        let mut c = vec![RatFunc::zero(); deg - 1];
        c.push(h.pow(z * deg as i64).unwrap());
        c.push(RatFunc::int(rng.gen_range(-3..=3)));
        let (kk, ck) = descent_multiplicative(&p, &c, &e, z).map_err(|e| format!("multiplicative {k}: {e}"))?;
        let ok = kk == deg && p.sigma(&ck, 1) == e.pow(z * kk as i64).unwrap().mul(&ck);
        ensure(ok, || format!("multiplicative {k}"))?;
    }
    for i in 0..10 {
        let err = if i % 2 == 0 {
            descent_linear(&p, &[g.scale(&rat(-2)), g.mul(&g)], &RatFunc::one(), &g).err()
        } else {
            descent_multiplicative(&p, &[g.add(&RatFunc::int(i))], &g, 1).err()
        };
        let msg = err.map(|e| e.to_string()).unwrap_or_default();
        ensure(msg == "descent hypothesis violated", || format!("inconsistent {i}: {msg:?}"))?;
    }
    Ok(())
}

fn torsor_system(n: usize) -> SystemModel {
    let mut base = Presentation::new();
    base.add_affine("t", RatFunc::one(), RatFunc::one()).unwrap();
    let one = || GenKind::Affine { linear: RatFunc::one(), constant: RatFunc::one() };
    let blocks = (1..=n).map(|i| vec![(format!("u{i}"), one())]).collect();
    build_system(base, blocks).unwrap()
}

/// Antisymmetric fixed family built from `u_k − t`, summed into an ff equation.
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

fn witness_driven() -> Result<(), String> {
    for (n, seeds) in [(3usize, 0..10u64), (4, 10..20)] {
        for seed in seeds {
            let mut m = torsor_system(n);
            let eq = planted_ff(&m, seed);
            let mut oracle = SearchOracle { bounds: SearchBounds { degree: 2, window: 0 } };
            let (dec, _) = ff_decompose_with_closure(&mut m, &eq, &mut oracle, seed, 16).map_err(|e| format!("n={n} seed={seed}: {e}"))?;
            let v = validate_decomposition(&m, &eq, &dec);
            ensure(v.valid, || format!("n={n} seed={seed}: {:?}", v.diagnostics))?;
            ensure(dec.c.values().all(|x| m.presentation().is_fixed(x)), || format!("n={n} seed={seed}: unfixed piece"))?;
        }
    }
    let (p, reg) = twisted_pair();
    let inst = build_height4_instance(&p).map_err(|e| e.to_string())?;
    let mut oracle = SearchOracle { bounds: SearchBounds { degree: 2, window: 1 } };
    match ff_decompose_with_witnesses(&inst.model, &inst.equation, &mut oracle, &mut GenericPoints::new(1)) {
        Err(SystemError::WitnessUnavailable { raw, corner, .. }) => {
            let over = inst.model.presentation().restrict(&corner).map_err(|e| e.to_string())?;
            let eq = Equation::Twisted(TwistedSas::torsor(raw));
            let out = certify_unsolvable(&over, &eq, Some(&reg));
            let c = out.certificate().ok_or_else(|| format!("blocked target {} not certified", eq.display(&over)))?;
            ensure(!c.registry_hits().is_empty(), || "certificate uses no avoided family".into())
        }
        Ok(_) => Err("the f-equation decomposed".into()),
        Err(e) => Err(format!("unexpected failure: {e}")),
    }
}

const SAMPLES: [(&str, Command); 11] = [
    ("torsor_one", Command::SolveSas),
    ("twisted_a1", Command::SolveSas),
    ("unknown", Command::SolveSas),
    ("mult_g", Command::SolveMult),
    ("decompose3", Command::Decompose),
    ("ff_torsors", Command::FfDecompose),
    ("character", Command::Character),
    ("hyperplane", Command::Hyperplane),
    ("amalg", Command::AmalgCheck),
    ("nsas", Command::NsasCheck),
    ("closure", Command::ClosureStep),
];

fn reproducibility() -> Result<(), String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("inputs");
    let mut jobs: Vec<Job> = SAMPLES
        .iter()
        .map(|(name, cmd)| {
            let text = std::fs::read_to_string(dir.join(format!("{name}.sigma"))).unwrap();
            Job::new(*cmd, Some(&text))
        })
        .collect();
    jobs.push(Job::new(Command::VerifyCounterexample, None));
    for mut job in jobs {
        job.seed = 42;
        let a = run(&job).map_err(|e| format!("{}: {e}", job.command.name()))?;
        let b = run(&job).map_err(|e| format!("{}: {e}", job.command.name()))?;
        ensure(a.json == b.json, || format!("{} reports differ", job.command.name()))?;
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, Check, Duration); 11] = [
        ("product identity", product_identity, Duration::from_secs(1)),
        ("decomposition suite", decomposition_suite, Duration::from_secs(30)),
        ("automorphism laws", automorphism_laws, Duration::from_secs(10)),
        ("free-base decisions", free_base_decisions, Duration::from_secs(5)),
        ("twisted-pair torsor refutation", twisted_pair_torsor, Duration::from_secs(60)),
        ("counterexample pipeline", counterexample_pipeline, Duration::from_secs(300)),
        ("character oracle equivalence", character_oracle, Duration::from_secs(20)),
        ("3-amalgamation obstruction", three_amalgamation, Duration::from_secs(5)),
        ("descent transformations", descent, Duration::from_secs(10)),
        ("witness-driven ff-decomposition", witness_driven, Duration::from_secs(60)),
        ("reproducibility", reproducibility, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (k, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = outcome.and_then(|()| ensure(took <= budget, || format!("over budget {budget:?}")));
        match outcome {
            Ok(()) => println!("PASS {:>2} {name} ({:.2?})", k + 1, took),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({:.2?}): {e}", k + 1, took);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
