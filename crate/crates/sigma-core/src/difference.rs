//! Finitely presented difference fields of characteristic 0.
//!
//! A [`Presentation`] is an ordered list of generators over Q. A free
//! generator `g` contributes the variables `g[k]`, `k ∈ Z`, and σ shifts the
//! index. An affine generator `a` with `σ(a) = αa + β` contributes only
//! `a` itself; its σ-images are expanded through the rule.
//!
//! Generator ids are stable: a sub-presentation keeps the ids of the
//! generators it retains, so elements can move between nested fields
//! without renaming.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::poly::{MPoly, VarId};
use crate::ratfunc::{normalize, RatFunc};

/// Elements are canonical rational functions; membership in a presentation
/// is checked by [`Presentation::check_element`].
pub type Element = RatFunc;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GenKind {
    Free,
    Affine { linear: RatFunc, constant: RatFunc },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub id: u32,
    pub name: String,
    pub kind: GenKind,
}

impl GeneratorSpec {
    pub fn is_free(&self) -> bool {
        matches!(self.kind, GenKind::Free)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
pub enum PresentationError {
    #[error("duplicate generator name {0}")]
    DuplicateName(String),
    #[error("generator {0}: linear part zero")]
    LinearPartZero(String),
    #[error("generator {name}: rule mentions {offending}, which is not declared earlier")]
    Stratification { name: String, offending: String },
    #[error("generator {name}: rule mentions shifted affine variable {offending}")]
    ShiftedAffine { name: String, offending: String },
    #[error("unknown generator {0}")]
    UnknownGenerator(String),
    #[error("element mentions {0}, which is not materializable in this presentation")]
    NotMaterializable(String),
}

/// Cached σ and σ⁻¹ images of an affine generator.
#[derive(Clone, Debug, PartialEq, Eq)]
struct AffineImages {
    forward: RatFunc,
    backward: RatFunc,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Presentation {
    gens: Vec<GeneratorSpec>,
    images: BTreeMap<u32, AffineImages>,
}

/// Checks a raw generator list without building a presentation. Every
/// violation is reported.
pub fn validate(specs: &[GeneratorSpec]) -> Result<(), Vec<PresentationError>> {
    let mut errs = Vec::new();
    let mut seen_names = BTreeSet::new();
    let mut earlier: BTreeMap<u32, &GeneratorSpec> = BTreeMap::new();
    for spec in specs {
        if !seen_names.insert(spec.name.clone()) {
            errs.push(PresentationError::DuplicateName(spec.name.clone()));
        }
        if let GenKind::Affine { linear, constant } = &spec.kind {
            if linear.is_zero() {
                errs.push(PresentationError::LinearPartZero(spec.name.clone()));
            }
            let mut vars = linear.vars();
            vars.extend(constant.vars());
            for v in vars {
                match earlier.get(&v.gen) {
                    Some(g) if v.gen < spec.id => {
                        if !g.is_free() && v.shift != 0 {
                            errs.push(PresentationError::ShiftedAffine {
                                name: spec.name.clone(),
                                offending: format!("{}[{}]", g.name, v.shift),
                            });
                        }
                    }
                    _ => {
                        let offending = specs
                            .iter()
                            .find(|s| s.id == v.gen)
                            .map(|s| s.name.clone())
                            .unwrap_or_else(|| format!("#{}", v.gen));
                        errs.push(PresentationError::Stratification {
                            name: spec.name.clone(),
                            offending,
                        });
                    }
                }
            }
        }
        earlier.insert(spec.id, spec);
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

impl Presentation {
    /// The prime field Q.
    pub fn new() -> Self {
        Presentation::default()
    }

    /// Builds from a generator list, validating it.
    pub fn from_specs(specs: Vec<GeneratorSpec>) -> Result<Self, Vec<PresentationError>> {
        validate(&specs)?;
        let mut p = Presentation::new();
        for spec in specs {
            p.install(spec);
        }
        Ok(p)
    }

    fn next_id(&self) -> u32 {
        self.gens.last().map(|g| g.id + 1).unwrap_or(0)
    }

    fn install(&mut self, spec: GeneratorSpec) {
        if let GenKind::Affine { linear, constant } = &spec.kind {
            let a = RatFunc::var(VarId::new(spec.id, 0));
            let forward = linear.mul(&a).add(constant);
            let back_lin = self.sigma_inv(linear);
            let back_const = self.sigma_inv(constant);
            let backward = a.sub(&back_const).div(&back_lin).expect("linear part nonzero");
            self.images.insert(spec.id, AffineImages { forward, backward });
        }
        self.gens.push(spec);
    }

    pub fn add_free(&mut self, name: &str) -> Result<u32, PresentationError> {
        self.add(name, GenKind::Free)
    }

    pub fn add_affine(
        &mut self,
        name: &str,
        linear: RatFunc,
        constant: RatFunc,
    ) -> Result<u32, PresentationError> {
        self.add(name, GenKind::Affine { linear, constant })
    }

    fn add(&mut self, name: &str, kind: GenKind) -> Result<u32, PresentationError> {
        let spec = GeneratorSpec {
            id: self.next_id(),
            name: name.to_string(),
            kind,
        };
        let mut all = self.gens.clone();
        all.push(spec.clone());
        if let Err(mut e) = validate(&all) {
            return Err(e.remove(0));
        }
        let id = spec.id;
        self.install(spec);
        Ok(id)
    }

    pub fn generators(&self) -> &[GeneratorSpec] {
        &self.gens
    }

    pub fn gen(&self, id: u32) -> Option<&GeneratorSpec> {
        self.gens
            .binary_search_by_key(&id, |g| g.id)
            .ok()
            .map(|i| &self.gens[i])
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.gens.iter().find(|g| g.name == name).map(|g| g.id)
    }

    pub fn ids(&self) -> BTreeSet<u32> {
        self.gens.iter().map(|g| g.id).collect()
    }

    pub fn is_free(&self, id: u32) -> bool {
        self.gen(id).map(|g| g.is_free()).unwrap_or(false)
    }

    pub fn all_free(&self) -> bool {
        self.gens.iter().all(|g| g.is_free())
    }

    /// The generator as an element (shift 0).
    pub fn var(&self, name: &str) -> Option<Element> {
        self.id_of(name).map(|id| RatFunc::var(VarId::new(id, 0)))
    }

    /// Shorthand for a generator known to exist.
    pub fn el(&self, name: &str) -> Element {
        self.var(name).unwrap_or_else(|| panic!("no generator {name}"))
    }

    pub fn affine_rule(&self, id: u32) -> Option<(&RatFunc, &RatFunc)> {
        match &self.gen(id)?.kind {
            GenKind::Affine { linear, constant } => Some((linear, constant)),
            GenKind::Free => None,
        }
    }

    /// The sub-presentation on `keep`, which must be closed under rule
    /// dependencies. Ids are preserved.
    pub fn restrict(&self, keep: &BTreeSet<u32>) -> Result<Presentation, PresentationError> {
        let specs: Vec<GeneratorSpec> =
            self.gens.iter().filter(|g| keep.contains(&g.id)).cloned().collect();
        for id in keep {
            if self.gen(*id).is_none() {
                return Err(PresentationError::UnknownGenerator(format!("#{id}")));
            }
        }
        Presentation::from_specs(specs).map_err(|mut e| e.remove(0))
    }

    /// Ids that `id`'s rule depends on, transitively, plus `id`.
    pub fn dependency_closure(&self, ids: &BTreeSet<u32>) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<u32> = ids.iter().copied().collect();
        while let Some(id) = stack.pop() {
            if !out.insert(id) {
                continue;
            }
            if let Some((l, c)) = self.affine_rule(id) {
                stack.extend(l.gens());
                stack.extend(c.gens());
            }
        }
        out
    }

    /// Checks that every variable of `x` is materializable here.
    pub fn check_element(&self, x: &Element) -> Result<(), PresentationError> {
        for v in x.vars() {
            match self.gen(v.gen) {
                Some(g) if g.is_free() || v.shift == 0 => {}
                _ => return Err(PresentationError::NotMaterializable(self.var_name(v))),
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &Element) -> bool {
        self.check_element(x).is_ok()
    }

    fn has_affine_var(&self, x: &RatFunc) -> bool {
        x.vars().iter().any(|v| !self.is_free(v.gen))
    }

    /// σ^k.
    pub fn sigma(&self, x: &Element, k: i64) -> Element {
        if k == 0 || x.is_constant() {
            return x.clone();
        }
        if !self.has_affine_var(x) {
            return x.map_vars_monotone(|v| v.shifted(k));
        }
        let mut y = x.clone();
        for _ in 0..k.unsigned_abs() {
            y = if k > 0 { self.sigma_once(&y, 1) } else { self.sigma_once(&y, -1) };
        }
        y
    }

    pub fn sigma_inv(&self, x: &Element) -> Element {
        self.sigma(x, -1)
    }

    fn sigma_once(&self, x: &RatFunc, dir: i64) -> RatFunc {
        let mut images = BTreeMap::new();
        for v in x.vars() {
            let img = match self.images.get(&v.gen) {
                Some(im) if dir > 0 => im.forward.clone(),
                Some(im) => im.backward.clone(),
                None => RatFunc::var(v.shifted(dir)),
            };
            images.insert(v, img);
        }
        substitute(x, &images)
    }

    /// ℘σ(x) = σ(x) − x.
    pub fn wp(&self, x: &Element) -> Element {
        self.sigma(x, 1).sub(x)
    }

    pub fn is_fixed(&self, x: &Element) -> bool {
        self.sigma(x, 1) == *x
    }

    pub fn var_name(&self, v: VarId) -> String {
        match self.gen(v.gen) {
            Some(g) if v.shift == 0 => g.name.clone(),
            Some(g) => format!("{}[{}]", g.name, v.shift),
            None => format!("#{}[{}]", v.gen, v.shift),
        }
    }

    pub fn fmt(&self, x: &Element) -> String {
        x.fmt_with(&|v| self.var_name(v))
    }

    /// Human-readable rule list, one generator per entry.
    pub fn describe(&self) -> Vec<String> {
        self.gens
            .iter()
            .map(|g| match &g.kind {
                GenKind::Free => format!("{} free", g.name),
                GenKind::Affine { linear, constant } => format!(
                    "s({}) = ({})*{} + ({})",
                    g.name,
                    self.fmt(linear),
                    g.name,
                    self.fmt(constant)
                ),
            })
            .collect()
    }
}

/// Simultaneous substitution of rational functions for variables. Variables
/// without an image stay as they are.
pub fn substitute(x: &RatFunc, images: &BTreeMap<VarId, RatFunc>) -> RatFunc {
    // Largest exponent of each variable across numerator and denominator;
    // the shared factor Π d_v^{E_v} cancels between the two halves.
    let mut top: BTreeMap<VarId, u32> = BTreeMap::new();
    for p in [x.num(), x.den()] {
        for (m, _) in p.terms() {
            for &(v, e) in m.pairs() {
                if images.contains_key(&v) {
                    let t = top.entry(v).or_insert(0);
                    *t = (*t).max(e);
                }
            }
        }
    }
    let mut cache: BTreeMap<(VarId, u32, bool), MPoly> = BTreeMap::new();
    let mut power = |v: VarId, e: u32, numer: bool| -> MPoly {
        cache
            .entry((v, e, numer))
            .or_insert_with(|| {
                let f = &images[&v];
                if numer {
                    f.num().pow(e)
                } else {
                    f.den().pow(e)
                }
            })
            .clone()
    };
    let mut lift = |p: &MPoly| -> MPoly {
        let mut out = MPoly::zero();
        for (m, c) in p.terms() {
            let mut t = MPoly::constant(c.clone());
            let mut rest = Vec::new();
            for (&v, &e_top) in &top {
                let e = m.exponent(v);
                if e > 0 {
                    t = t.mul(&power(v, e, true));
                }
                if e_top > e {
                    t = t.mul(&power(v, e_top - e, false));
                }
            }
            for &(v, e) in m.pairs() {
                if !images.contains_key(&v) {
                    rest.push((v, e));
                }
            }
            if !rest.is_empty() {
                t = t.mul_monomial(&crate::poly::Monomial::from_pairs(rest));
            }
            out = out.add(&t);
        }
        out
    };
    let num = lift(x.num());
    let den = lift(x.den());
    debug_assert!(!den.is_zero());
    normalize(num, den).expect("automorphic substitution keeps den nonzero")
}

/// Convenience for tests and examples: `g` free and the twisted pair
/// `σ(a1) = g·a1 + g`, `σ(a2) = a2/g + 1/g`.
pub fn twisted_pair_presentation() -> Presentation {
    let mut p = Presentation::new();
    p.add_free("g").unwrap();
    let g = p.el("g");
    let gi = g.inv().unwrap();
    p.add_affine("a1", g.clone(), g).unwrap();
    p.add_affine("a2", gi.clone(), gi).unwrap();
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    #[test]
    fn free_shift() {
        let mut p = Presentation::new();
        p.add_free("g").unwrap();
        let g = p.el("g");
        assert_eq!(p.fmt(&p.sigma(&g, 1)), "g[1]");
        assert!(!p.is_fixed(&g));
        assert!(p.is_fixed(&RatFunc::constant(crate::rat::frac(7, 3))));
    }

    #[test]
    fn affine_rule_and_inverse() {
        let p = twisted_pair_presentation();
        let (g, a1) = (p.el("g"), p.el("a1"));
        assert_eq!(p.sigma(&a1, 1), g.mul(&a1).add(&g));
        let back = p.sigma(&a1, -1);
        let g_m1 = p.sigma(&g, -1);
        assert_eq!(back, a1.div(&g_m1).unwrap().sub(&RatFunc::one()));
        assert_eq!(p.sigma(&back, 1), a1);
    }

    #[test]
    fn product_identity() {
        let p = twisted_pair_presentation();
        let (a1, a2) = (p.el("a1"), p.el("a2"));
        assert_eq!(p.wp(&a1.mul(&a2)), a1.add(&a2).add(&RatFunc::one()));
    }

    #[test]
    fn wp_of_twisted_generator() {
        let p = twisted_pair_presentation();
        let (g, a1) = (p.el("g"), p.el("a1"));
        let expect = g.sub(&RatFunc::one()).mul(&a1).add(&g);
        assert_eq!(p.wp(&a1), expect);
        assert!(p.wp(&RatFunc::int(5)).is_zero());
    }

    #[test]
    fn validation_errors() {
        let zero = GeneratorSpec {
            id: 0,
            name: "a".into(),
            kind: GenKind::Affine { linear: RatFunc::zero(), constant: RatFunc::one() },
        };
        assert_eq!(
            validate(&[zero]),
            Err(vec![PresentationError::LinearPartZero("a".into())])
        );
        let a = GeneratorSpec {
            id: 0,
            name: "a".into(),
            kind: GenKind::Affine {
                linear: RatFunc::var(VarId::new(1, 0)),
                constant: RatFunc::zero(),
            },
        };
        let b = GeneratorSpec { id: 1, name: "b".into(), kind: GenKind::Free };
        let errs = validate(&[a, b]).unwrap_err();
        assert!(matches!(errs[0], PresentationError::Stratification { .. }));
        let mut p = Presentation::new();
        p.add_free("g").unwrap();
        assert_eq!(p.add_free("g"), Err(PresentationError::DuplicateName("g".into())));
    }

    #[test]
    fn restriction_keeps_ids() {
        let p = twisted_pair_presentation();
        let keep: BTreeSet<u32> = [0, 2].into_iter().collect();
        let q = p.restrict(&keep).unwrap();
        assert_eq!(q.id_of("a2"), Some(2));
        assert!(q.contains(&q.el("a2")));
        assert!(!q.contains(&p.el("a1")));
        assert_eq!(q.sigma(&q.el("a2"), 1), p.sigma(&p.el("a2"), 1));
    }

    #[test]
    fn sigma_power_round_trip() {
        let p = twisted_pair_presentation();
        let x = p.el("a1").mul(&p.el("a2")).add(&p.el("g").scale(&rat(3)));
        for k in 1..=3 {
            assert_eq!(p.sigma(&p.sigma(&x, k), -k), x);
        }
    }
}
