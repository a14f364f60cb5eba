//! Leading-coefficient reduction over affine extensions and replayable
//! non-existence certificates.
//!
//! Let `a` be the top generator with `σ(a) = αa + β`, `α, β` in the base
//! `K`, and write a candidate solution as `x = Σ e_i a^i / Σ ẽ_j a^j` with
//! `e_n ẽ_m ≠ 0`. Clearing denominators in `σ(x) − e1·x = e2` (with
//! `e1 ∈ K`, `e2 ∈ K[a]` of degree `p2`) and comparing top coefficients in
//! `a` gives, for `y = e_n/ẽ_m` and `d = n − m`:
//!
//! * `d < p2`: the right side has larger degree, contradiction;
//! * `d = p2`: `σ(y) − (e1/α^p2)·y = lc(e2)/α^p2`;
//! * `d > p2`: `σ(y) = e1·α^(−d)·y`.
//!
//! For `σ(x) = f·x` every `d` gives `σ(y) = f·α^(−d)·y`. The certifier walks
//! these classes down the extension stack until each lands in a registered
//! avoided family or in an extremal-shift refutation over a free base.
//! Every class also carries concrete samples `(n, m)` recomputed by actual
//! symbolic substitution, so a certificate never rests on the formula alone.

use std::collections::BTreeSet;

use serde::Serialize;

use super::freebase::{free_base_node, WindowRecord};
use super::search::{affine_top, top_degree_and_lc};
use super::{as_var_power, check_coefficients, Equation, Lin, SasError};
use crate::difference::{Element, Presentation};
use crate::poly::{MPoly, Monomial, VarId};
use crate::ratfunc::RatFunc;

/// Exponents `z` of a family `σ(y) = e^z·y`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ExponentSet {
    NonzeroAll,
    Single(i64),
    /// `{offset − slope·d}` over `d ≥ d_min`, or all integers `d`.
    Progression { offset: i64, slope: i64, d_min: Option<i64> },
}

impl ExponentSet {
    pub fn excludes_zero(&self) -> bool {
        match *self {
            ExponentSet::NonzeroAll => true,
            ExponentSet::Single(z) => z != 0,
            ExponentSet::Progression { offset, slope, d_min } => {
                if slope == 0 {
                    return offset != 0;
                }
                if offset % slope != 0 {
                    return true;
                }
                match d_min {
                    None => false,
                    Some(lo) => offset / slope < lo,
                }
            }
        }
    }

    fn scaled(&self, k: i64) -> ExponentSet {
        match *self {
            ExponentSet::NonzeroAll => ExponentSet::NonzeroAll,
            ExponentSet::Single(z) => ExponentSet::Single(k * z),
            ExponentSet::Progression { offset, slope, d_min } => {
                ExponentSet::Progression { offset: k * offset, slope: k * slope, d_min }
            }
        }
    }

    /// A concrete member, used to build sample equations.
    fn representative(&self) -> i64 {
        match *self {
            ExponentSet::NonzeroAll => 1,
            ExponentSet::Single(z) => z,
            ExponentSet::Progression { offset, slope, d_min } => {
                let d = d_min.unwrap_or(1);
                let z = offset - slope * d;
                if z != 0 {
                    z
                } else {
                    offset - slope * (d + 1)
                }
            }
        }
    }

    fn display_exponent(&self) -> String {
        match *self {
            ExponentSet::NonzeroAll => "z, z != 0".to_string(),
            ExponentSet::Single(z) => format!("{z}"),
            ExponentSet::Progression { offset, slope, d_min } => {
                let c = -slope;
                let dterm = match c {
                    0 => String::new(),
                    1 => "d".to_string(),
                    -1 => "-d".to_string(),
                    _ => format!("{c}*d"),
                };
                let expr = match (offset, c) {
                    (_, 0) => format!("{offset}"),
                    (0, _) => dterm,
                    (_, c) if c > 0 => format!("{offset}+{dterm}"),
                    _ => format!("{offset}{dterm}"),
                };
                match d_min {
                    Some(lo) => format!("({expr}), d >= {lo}"),
                    None => format!("({expr}), d in Z"),
                }
            }
        }
    }
}

/// What the certifier tries to refute.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Goal {
    /// `σ(y) − e1·y = e2` with `e2 ≠ 0`.
    Twisted { e1: Element, e2: Element },
    /// `σ(y) = e^z·y`, `y ≠ 0`, for every `z` in `exps`.
    MultFamily { e: Element, exps: ExponentSet },
}

impl Goal {
    pub fn twisted(e1: Element, e2: Element) -> Goal {
        if e2.is_zero() {
            Goal::mult_family(&e1, ExponentSet::Single(1))
        } else {
            Goal::Twisted { e1, e2 }
        }
    }

    /// Normalizes `e = v^k` to base `v` with exponents scaled by `k`.
    pub fn mult_family(e: &Element, exps: ExponentSet) -> Goal {
        match as_var_power(e) {
            Some((v, k)) if k != 1 => Goal::MultFamily { e: RatFunc::var(v), exps: exps.scaled(k) },
            _ => Goal::MultFamily { e: e.clone(), exps },
        }
    }

    pub fn from_equation(eq: &Equation) -> Goal {
        match eq {
            Equation::Twisted(t) => Goal::twisted(t.e1.clone(), t.e2.clone()),
            Equation::Multiplicative(m) => Goal::mult_family(&m.e, ExponentSet::Single(m.z)),
        }
    }

    pub fn coefficients(&self) -> Vec<&Element> {
        match self {
            Goal::Twisted { e1, e2 } => vec![e1, e2],
            Goal::MultFamily { e, .. } => vec![e],
        }
    }

    pub fn display(&self, p: &Presentation) -> String {
        match self {
            Goal::Twisted { e1, e2 } => {
                Lin::Twisted { e1: e1.clone(), e2: e2.clone() }.display(p, "y")
            }
            Goal::MultFamily { e, exps } => {
                let base = if as_var_power(e).is_some() || e.is_constant() {
                    p.fmt(e)
                } else {
                    format!("({})", p.fmt(e))
                };
                format!("s(y)/y = {base}^{}", exps.display_exponent())
            }
        }
    }

    fn sample_lin(&self) -> Lin {
        match self {
            Goal::Twisted { e1, e2 } => Lin::Twisted { e1: e1.clone(), e2: e2.clone() },
            Goal::MultFamily { e, exps } => Lin::Homog { f: e.pow(exps.representative()).expect("e nonzero") },
        }
    }
}

/// Outcome of one leading-coefficient comparison.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Reduced {
    Twisted { e1: Element, e2: Element },
    Homog { f: Element },
    Contradiction,
}

impl Reduced {
    pub fn display(&self, p: &Presentation) -> String {
        match self {
            Reduced::Twisted { e1, e2 } => {
                Lin::Twisted { e1: e1.clone(), e2: e2.clone() }.display(p, "y")
            }
            Reduced::Homog { f } => format!("s(y)/y = {}", p.fmt(f)),
            Reduced::Contradiction => "contradiction".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Sample {
    pub n: u32,
    pub m: u32,
    pub derived: String,
    #[serde(skip)]
    pub raw: Reduced,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeCase {
    pub class: String,
    pub derived: String,
    pub samples: Vec<Sample>,
    #[serde(skip)]
    pub child: Option<Goal>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertStep {
    ExtremalShift { windows: Vec<WindowRecord>, constant_case: String },
    Registry { family: String },
    Reduction { generator: String, rule: String, cases: Vec<DegreeCase> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertNode {
    pub goal: String,
    #[serde(skip)]
    pub raw: Goal,
    pub step: CertStep,
    pub children: Vec<CertNode>,
}

impl CertNode {
    pub(crate) fn new(p: &Presentation, goal: Goal, step: CertStep, children: Vec<CertNode>) -> Self {
        CertNode { goal: goal.display(p), raw: goal, step, children }
    }

    /// Derived equations in depth-first order, as displayed.
    pub fn derived_equations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let CertStep::Reduction { cases, .. } = &self.step {
            for c in cases {
                out.push(c.derived.clone());
            }
        }
        for ch in &self.children {
            out.extend(ch.derived_equations());
        }
        out
    }

    fn registry_hits(&self, out: &mut Vec<String>) {
        if let CertStep::Registry { family } = &self.step {
            out.push(family.clone());
        }
        for ch in &self.children {
            ch.registry_hits(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub equation: String,
    pub presentation: Vec<String>,
    pub root: CertNode,
}

impl Certificate {
    pub(crate) fn new(p: &Presentation, eq: &Equation, root: CertNode) -> Self {
        Certificate { equation: eq.display(p), presentation: p.describe(), root }
    }

    pub fn derived_equations(&self) -> Vec<String> {
        self.root.derived_equations()
    }

    /// Labels of registry families the derivation terminates in.
    pub fn registry_hits(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.root.registry_hits(&mut out);
        out
    }

    /// Re-derives every step from the presentation: reductions and their
    /// samples are recomputed by substitution, free-base steps by the
    /// extremal-shift argument, and registry steps are looked up and their
    /// own certificates replayed.
    pub fn replay(&self, p: &Presentation, registry: Option<&AvoidedRegistry>) -> Result<(), String> {
        replay_node(p, &self.root, registry)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CertifyOutcome {
    Certificate(Certificate),
    Unknown(String),
}

impl CertifyOutcome {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            CertifyOutcome::Certificate(c) => Some(c),
            CertifyOutcome::Unknown(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegisteredFamily {
    pub label: String,
    pub goal: Goal,
    pub certificate: Certificate,
}

/// Families certified unsolvable over a fixed presentation.
#[derive(Clone, Debug, PartialEq)]
pub struct AvoidedRegistry {
    pub presentation: Presentation,
    pub families: Vec<RegisteredFamily>,
    /// The registry the certificates were built against, if any.
    pub prior: Option<Box<AvoidedRegistry>>,
}

impl AvoidedRegistry {
    /// Certifies every `(label, goal)` over `p`, using `prior` for the layer
    /// below. Fails with the label and reason of the first family that does
    /// not certify.
    pub fn certify(
        p: &Presentation,
        families: &[(String, Goal)],
        prior: Option<&AvoidedRegistry>,
    ) -> Result<AvoidedRegistry, (String, String)> {
        let mut out = Vec::new();
        for (label, goal) in families {
            let root = certify_goal(p, goal, prior).map_err(|r| (label.clone(), r))?;
            let certificate = Certificate {
                equation: goal.display(p),
                presentation: p.describe(),
                root,
            };
            out.push(RegisteredFamily { label: label.clone(), goal: goal.clone(), certificate });
        }
        Ok(AvoidedRegistry {
            presentation: p.clone(),
            families: out,
            prior: prior.map(|r| Box::new(r.clone())),
        })
    }

    pub fn lookup(&self, p: &Presentation, goal: &Goal) -> Option<&RegisteredFamily> {
        if p.generators() != self.presentation.generators() {
            return None;
        }
        self.families.iter().find(|f| family_covers(&f.goal, goal))
    }

    /// Replays every family certificate, recursively through prior layers.
    pub fn replay(&self) -> Result<(), String> {
        for f in &self.families {
            f.certificate
                .replay(&self.presentation, self.prior.as_deref())
                .map_err(|e| format!("{}: {e}", f.label))?;
        }
        Ok(())
    }
}

fn family_covers(reg: &Goal, goal: &Goal) -> bool {
    match (reg, goal) {
        (Goal::Twisted { e1: r1, e2: r2 }, Goal::Twisted { e1, e2 }) => {
            // x ↦ x/q carries a solution for q·r2 to one for r2.
            e1 == r1 && e2.div(r2).map(|q| q.is_constant()).unwrap_or(false)
        }
        (Goal::MultFamily { e: r, exps: ExponentSet::NonzeroAll }, Goal::MultFamily { e, exps }) => {
            e == r && exps.excludes_zero()
        }
        (Goal::MultFamily { e: r, exps: ExponentSet::Single(rz) }, Goal::MultFamily { e, exps: ExponentSet::Single(z) }) => {
            e == r && rz == z
        }
        _ => false,
    }
}

/// Top-coefficient comparison for the ansatz degrees `(n, m)`, by symbolic
/// substitution. The last generator of `p` must be affine over the rest.
pub fn reduce_over_affine_extension(
    p: &Presentation,
    eq: &Equation,
    n: u32,
    m: u32,
) -> Result<Reduced, SasError> {
    check_coefficients(p, &eq.coefficients())?;
    reduce_lin(p, &eq.lin(), n, m)
}

pub(crate) fn reduce_lin(p: &Presentation, lin: &Lin, n: u32, m: u32) -> Result<Reduced, SasError> {
    let (top, _, _) = affine_top(p).ok_or(SasError::NoAffineTop)?;
    let a = VarId::new(top, 0);
    let (e1, e2) = match lin {
        Lin::Twisted { e1, e2 } => (e1, Some(e2)),
        Lin::Homog { f } => (f, None),
    };
    if e1.vars().contains(&a) {
        return Err(SasError::UnsupportedShape("twist coefficient mentions the top generator".into()));
    }
    if let Some(e2) = e2 {
        if e2.den().contains_var(a) {
            return Err(SasError::UnsupportedShape("right-hand side has the top generator in a denominator".into()));
        }
    }
    // Formal symbols E_i, F_j stand for the base coefficients of the ansatz;
    // σ(E_i) = E_i[1] keeps them formally independent.
    let mut aug = p.clone();
    let es: Vec<u32> = (0..=n)
        .map(|i| aug.add_free(&format!("__e{i}")).expect("fresh"))
        .collect();
    let fs: Vec<u32> = (0..=m)
        .map(|j| aug.add_free(&format!("__f{j}")).expect("fresh"))
        .collect();
    let av = RatFunc::var(a);
    let build = |ids: &[u32]| -> RatFunc {
        ids.iter().enumerate().fold(RatFunc::zero(), |acc, (i, &id)| {
            acc.add(&RatFunc::var(VarId::new(id, 0)).mul(&av.pow(i as i64).unwrap()))
        })
    };
    let num = build(&es);
    let den = build(&fs);
    let snum = aug.sigma(&num, 1);
    let sden = aug.sigma(&den, 1);
    let mut poly = snum.mul(&den).sub(&e1.mul(&num).mul(&sden));
    if let Some(e2) = e2 {
        poly = poly.sub(&e2.mul(&den).mul(&sden));
    }
    if poly.den().contains_var(a) {
        return Err(SasError::UnsupportedShape("cleared equation keeps the top generator in a denominator".into()));
    }
    let top_coeff = poly
        .num()
        .coefficients_in(a)
        .last()
        .cloned()
        .ok_or_else(|| SasError::NotInNormalPosition("identically zero".into()))?;
    let formal: BTreeSet<u32> = es.iter().chain(&fs).copied().collect();
    let en = es[n as usize];
    let fm = fs[m as usize];
    let key = |pairs: Vec<(VarId, u32)>| Monomial::from_pairs(pairs);
    let k_a = key(vec![(VarId::new(en, 1), 1), (VarId::new(fm, 0), 1)]);
    let k_b = key(vec![(VarId::new(en, 0), 1), (VarId::new(fm, 1), 1)]);
    let k_c = key(vec![(VarId::new(fm, 0), 1), (VarId::new(fm, 1), 1)]);
    let (mut pa, mut pb, mut pc) = (MPoly::zero(), MPoly::zero(), MPoly::zero());
    for (mono, c) in top_coeff.terms() {
        let (formal_part, rest): (Vec<_>, Vec<_>) =
            mono.pairs().iter().partition(|(v, _)| formal.contains(&v.gen));
        let fk = Monomial::from_pairs(formal_part);
        let target = if fk == k_a {
            &mut pa
        } else if fk == k_b {
            &mut pb
        } else if fk == k_c {
            &mut pc
        } else {
            return Err(SasError::NotInNormalPosition(format!(
                "unexpected leading structure {}",
                aug.fmt(&RatFunc::from_poly(MPoly::term(mono.clone(), c.clone())))
            )));
        };
        target.add_term(Monomial::from_pairs(rest), c.clone());
    }
    let d = RatFunc::from_poly(poly.den().clone());
    let over = |q: MPoly| RatFunc::from_poly(q).div(&d).expect("den nonzero");
    let (ca, cb, cc) = (over(pa), over(pb), over(pc));
    if !ca.is_zero() {
        let f = cb.neg().div(&ca).unwrap();
        if cc.is_zero() {
            return Ok(Reduced::Homog { f });
        }
        return Ok(Reduced::Twisted { e1: f, e2: cc.neg().div(&ca).unwrap() });
    }
    if cb.is_zero() && !cc.is_zero() {
        return Ok(Reduced::Contradiction);
    }
    Err(SasError::NotInNormalPosition("vanishing leading coefficient of the unknown".into()))
}

fn sample_pairs(d: i64) -> (u32, u32) {
    let m = (-d).max(0) + 1;
    ((d + m) as u32, m as u32)
}

/// Degree classes, their derived goals and recomputed samples, for `goal`
/// over the affine top of `p`.
fn reduction_cases(p: &Presentation, goal: &Goal) -> Result<Vec<DegreeCase>, String> {
    let (top, alpha, _) = affine_top(p).ok_or("top generator is not affine")?;
    let a = VarId::new(top, 0);
    let base_ids: BTreeSet<u32> = p.ids().into_iter().filter(|&i| i != top).collect();
    let base = p.restrict(&base_ids).map_err(|e| e.to_string())?;
    let alpha_pow = |k: i64| alpha.pow(k).expect("alpha nonzero");
    let lin = goal.sample_lin();
    let mut cases = Vec::new();
    let sample = |n: u32, m: u32, expect: &Reduced| -> Result<Sample, String> {
        let raw = reduce_lin(p, &lin, n, m).map_err(|e| e.to_string())?;
        if &raw != expect {
            return Err(format!(
                "sample (n={n}, m={m}) gave {} but the class formula predicts {}",
                raw.display(&base),
                expect.display(&base)
            ));
        }
        Ok(Sample { n, m, derived: raw.display(&base), raw })
    };
    match goal {
        Goal::Twisted { e1, e2 } => {
            if e1.vars().contains(&a) {
                return Err("twist coefficient mentions the top generator".into());
            }
            let (p2, lc) = top_degree_and_lc(e2, a)
                .ok_or("right-hand side is not polynomial in the top generator")?;
            let p2 = p2 as i64;
            let mut below = Vec::new();
            for d in [p2 - 1, p2 - 2] {
                let (n, m) = sample_pairs(d);
                below.push(sample(n, m, &Reduced::Contradiction)?);
            }
            cases.push(DegreeCase {
                class: format!("d < {p2}"),
                derived: "contradiction: right-hand side has larger degree".into(),
                samples: below,
                child: None,
            });
            let s = alpha_pow(-p2);
            let (c1, c2) = (e1.mul(&s), lc.mul(&s));
            let expect = Reduced::Twisted { e1: c1.clone(), e2: c2.clone() };
            let mut eq_samples = vec![sample(p2 as u32, 0, &expect)?];
            eq_samples.push(sample(p2 as u32 + 1, 1, &expect)?);
            let child = Goal::twisted(c1, c2);
            cases.push(DegreeCase {
                class: format!("d = {p2}"),
                derived: child.display(&base),
                samples: eq_samples,
                child: Some(child),
            });
            let mut above = Vec::new();
            for d in [p2 + 1, p2 + 2] {
                let (n, m) = sample_pairs(d);
                above.push(sample(n, m, &Reduced::Homog { f: e1.mul(&alpha_pow(-d)) })?);
            }
            let child = if alpha.is_one() {
                Goal::mult_family(e1, ExponentSet::Single(1))
            } else {
                let (v, s) = as_var_power(&alpha).ok_or("linear part is not a power of one variable")?;
                let z1 = if e1.is_one() {
                    0
                } else {
                    match as_var_power(e1) {
                        Some((w, k)) if w == v => k,
                        _ => return Err("twist is not a power of the linear part's variable".into()),
                    }
                };
                Goal::MultFamily {
                    e: RatFunc::var(v),
                    exps: ExponentSet::Progression { offset: z1, slope: s, d_min: Some(p2 + 1) },
                }
            };
            cases.push(DegreeCase {
                class: format!("d > {p2}"),
                derived: child.display(&base),
                samples: above,
                child: Some(child),
            });
        }
        Goal::MultFamily { e, exps } => {
            if e.vars().contains(&a) {
                return Err("family base mentions the top generator".into());
            }
            let f = match &lin {
                Lin::Homog { f } => f.clone(),
                Lin::Twisted { .. } => unreachable!(),
            };
            let mut samples = Vec::new();
            for d in [-1i64, 0, 1, 2] {
                let (n, m) = sample_pairs(d);
                samples.push(sample(n, m, &Reduced::Homog { f: f.mul(&alpha_pow(-d)) })?);
            }
            let child = if alpha.is_one() {
                goal.clone()
            } else {
                match (as_var_power(&alpha), exps) {
                    (Some((v, s)), ExponentSet::Single(z)) if RatFunc::var(v) == *e => Goal::MultFamily {
                        e: e.clone(),
                        exps: ExponentSet::Progression { offset: *z, slope: s, d_min: None },
                    },
                    _ => return Err("multiplicative family does not pass the twisted extension".into()),
                }
            };
            cases.push(DegreeCase {
                class: "all d".into(),
                derived: child.display(&base),
                samples,
                child: Some(child),
            });
        }
    }
    Ok(cases)
}

pub(crate) fn certify_goal(
    p: &Presentation,
    goal: &Goal,
    registry: Option<&AvoidedRegistry>,
) -> Result<CertNode, String> {
    if let Some(reg) = registry {
        if let Some(fam) = reg.lookup(p, goal) {
            return Ok(CertNode::new(
                p,
                goal.clone(),
                CertStep::Registry { family: fam.label.clone() },
                Vec::new(),
            ));
        }
    }
    if p.all_free() {
        return free_base_node(p, goal)
            .ok_or_else(|| format!("free base does not refute {}", goal.display(p)));
    }
    let (top, _, _) = affine_top(p).ok_or("top generator is not affine")?;
    let base_ids: BTreeSet<u32> = p.ids().into_iter().filter(|&i| i != top).collect();
    let base = p.restrict(&base_ids).map_err(|e| e.to_string())?;
    let cases = reduction_cases(p, goal)?;
    let mut children = Vec::new();
    for case in &cases {
        if let Some(child) = &case.child {
            let node = certify_goal(&base, child, registry)
                .map_err(|r| format!("case {}: {r}", case.class))?;
            children.push(node);
        }
    }
    let gen = p.gen(top).expect("top");
    let rule = p.describe().last().cloned().unwrap_or_default();
    Ok(CertNode::new(
        p,
        goal.clone(),
        CertStep::Reduction { generator: gen.name.clone(), rule, cases },
        children,
    ))
}

fn replay_node(p: &Presentation, node: &CertNode, registry: Option<&AvoidedRegistry>) -> Result<(), String> {
    if node.goal != node.raw.display(p) {
        return Err(format!("goal text {} does not match its data", node.goal));
    }
    match &node.step {
        CertStep::Registry { family } => {
            let reg = registry.ok_or("registry step without a registry")?;
            let fam = reg
                .lookup(p, &node.raw)
                .ok_or_else(|| format!("{} is not covered by the registry", node.goal))?;
            if &fam.label != family {
                return Err(format!("registry label {family} does not match {}", fam.label));
            }
            fam.certificate.replay(&reg.presentation, reg.prior.as_deref())
        }
        CertStep::ExtremalShift { .. } => match free_base_node(p, &node.raw) {
            Some(n) if &n == node => Ok(()),
            _ => Err(format!("extremal-shift step for {} does not replay", node.goal)),
        },
        CertStep::Reduction { cases, .. } => {
            let again = reduction_cases(p, &node.raw)?;
            if &again != cases {
                return Err(format!("reduction cases for {} do not replay", node.goal));
            }
            let (top, _, _) = affine_top(p).ok_or("top generator is not affine")?;
            let base_ids: BTreeSet<u32> = p.ids().into_iter().filter(|&i| i != top).collect();
            let base = p.restrict(&base_ids).map_err(|e| e.to_string())?;
            let kids: Vec<&Goal> = cases.iter().filter_map(|c| c.child.as_ref()).collect();
            if kids.len() != node.children.len() {
                return Err("child count mismatch".into());
            }
            for (goal, child) in kids.into_iter().zip(&node.children) {
                if goal != &child.raw {
                    return Err(format!("child goal {} does not match its case", child.goal));
                }
                replay_node(&base, child, registry)?;
            }
            Ok(())
        }
    }
}

/// Tries to certify that `eq` has no solution in `p` (no nonzero solution
/// for multiplicative equations).
pub fn certify_unsolvable(
    p: &Presentation,
    eq: &Equation,
    registry: Option<&AvoidedRegistry>,
) -> CertifyOutcome {
    if let Err(e) = check_coefficients(p, &eq.coefficients()) {
        return CertifyOutcome::Unknown(e.to_string());
    }
    if let Equation::Twisted(t) = eq {
        if t.e2.is_zero() {
            return CertifyOutcome::Unknown("x = 0 solves the homogeneous equation".into());
        }
    }
    let goal = Goal::from_equation(eq);
    match certify_goal(p, &goal, registry) {
        Ok(root) => CertifyOutcome::Certificate(Certificate::new(p, eq, root)),
        Err(reason) => CertifyOutcome::Unknown(reason),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::difference::twisted_pair_presentation;
    use crate::sas::TwistedSas;

    fn e_a1() -> Presentation {
        let p = twisted_pair_presentation();
        p.restrict(&[0, 1].into_iter().collect()).unwrap()
    }

    #[test]
    fn twisted_pair_case_equations() {
        let p = e_a1();
        let g = p.el("g");
        let gi = g.inv().unwrap();
        let eq = Equation::Twisted(TwistedSas::torsor(p.el("a1")));
        assert_eq!(
            reduce_over_affine_extension(&p, &eq, 2, 1).unwrap(),
            Reduced::Twisted { e1: gi.clone(), e2: gi.clone() }
        );
        assert_eq!(
            reduce_over_affine_extension(&p, &eq, 3, 1).unwrap(),
            Reduced::Homog { f: gi.pow(2).unwrap() }
        );
        assert_eq!(reduce_over_affine_extension(&p, &eq, 1, 1).unwrap(), Reduced::Contradiction);
    }

    #[test]
    fn torsor_over_twisted_generator_certifies() {
        let p = e_a1();
        let eq = Equation::Twisted(TwistedSas::torsor(p.el("a1")));
        let cert = certify_unsolvable(&p, &eq, None);
        let cert = cert.certificate().expect("certified");
        let derived = cert.derived_equations();
        assert!(derived.contains(&"s(y) - (1/g)*y = 1/g".to_string()), "{derived:?}");
        assert!(derived.contains(&"s(y)/y = g^(-d), d >= 2".to_string()), "{derived:?}");
        cert.replay(&p, None).unwrap();
    }

    #[test]
    fn torsor_extension_passes_family_through() {
        let mut p = Presentation::new();
        p.add_free("g").unwrap();
        let g = p.el("g");
        p.add_affine("t", RatFunc::one(), RatFunc::one()).unwrap();
        let eq = Equation::Twisted(TwistedSas::new(g.clone(), g.clone()).unwrap());
        assert!(certify_unsolvable(&p, &eq, None).certificate().is_some());
    }

    #[test]
    fn exponent_sets() {
        let s = ExponentSet::Progression { offset: 0, slope: 1, d_min: Some(2) };
        assert!(s.excludes_zero());
        let t = ExponentSet::Progression { offset: 3, slope: 1, d_min: Some(2) };
        assert!(!t.excludes_zero());
        let u = ExponentSet::Progression { offset: 3, slope: 2, d_min: None };
        assert!(u.excludes_zero());
    }

    #[test]
    fn tampered_certificate_rejected() {
        let p = e_a1();
        let eq = Equation::Twisted(TwistedSas::torsor(p.el("a1")));
        let mut cert = certify_unsolvable(&p, &eq, None).certificate().unwrap().clone();
        if let CertStep::Reduction { cases, .. } = &mut cert.root.step {
            cases[1].samples[0].raw = Reduced::Contradiction;
        }
        assert!(cert.replay(&p, None).is_err());
    }
}
