//! Independent n-systems, additive equations and their decompositions.
//!
//! A system is a presentation split into a base and `n` blocks. Every
//! non-base generator has a *home*, a nonempty set of block indices, and the
//! corner `w` is the base together with every generator whose home lies in
//! `w`. Block generators have singleton homes; generators adjoined later
//! (torsor witnesses over two-block corners, say) may have larger ones.
//! Fresh generators are algebraically independent of everything else, so
//! corners intersect as their index sets do.
//!
//! Indices are 0-based in the API and 1-based in diagnostics.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::difference::{Element, GenKind, Presentation, PresentationError};
use crate::linalg::SparseSystem;
use crate::poly::{MPoly, Monomial, VarId};
use crate::rat::Rat;
use crate::ratfunc::RatFunc;
use crate::sas::{clear_denominators, monomials, solve_twisted_bounded, SearchBounds, SolveResult, TwistedSas};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error(transparent)]
    Presentation(#[from] PresentationError),
    #[error("block {0} is empty")]
    EmptyBlock(usize),
    #[error("generator {0} appears in more than one block")]
    SharedGenerator(String),
    #[error("generator {name}: rule mentions {offending}, outside its corner")]
    CrossBlock { name: String, offending: String },
    #[error("generator {0} has no valid home")]
    BadHome(String),
    #[error("height must be at least {0}")]
    TooSmall(usize),
    #[error("expected {expected} summands, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("summand {0} mentions a variable of its own block")]
    Membership(usize),
    #[error("summands do not sum to zero")]
    NonzeroSum,
    #[error("summand {0} is not fixed")]
    NotFixed(usize),
    #[error("sum of the summands is not fixed")]
    SumNotFixed,
    #[error("no generic point found")]
    NoGenericPoint,
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("witness unavailable at T_({target}) over corner {{{}}}", fmt_home(.home))]
    WitnessUnavailable {
        target: String,
        /// Original block indices of the corner.
        home: BTreeSet<usize>,
        raw: Element,
        /// Generator ids of the corner.
        corner: BTreeSet<u32>,
    },
}

fn fmt_home(h: &BTreeSet<usize>) -> String {
    h.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    presentation: Presentation,
    base: BTreeSet<u32>,
    homes: BTreeMap<u32, BTreeSet<usize>>,
    n: usize,
    /// Original index of each current block.
    labels: Vec<usize>,
    /// Original blocks folded into the base by restriction.
    over: BTreeSet<usize>,
}

/// Builds a system from a base presentation and generator blocks. A block
/// generator's rule may use the base and earlier generators of its block.
pub fn build_system(
    base: Presentation,
    blocks: Vec<Vec<(String, GenKind)>>,
) -> Result<SystemModel, SystemError> {
    let base_ids = base.ids();
    let mut p = base;
    let mut homes = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (i, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(SystemError::EmptyBlock(i + 1));
        }
        let mut own: BTreeSet<u32> = BTreeSet::new();
        for (name, kind) in block {
            if !seen.insert(name.clone()) || base_ids.iter().any(|&b| p.gen(b).unwrap().name == *name) {
                return Err(SystemError::SharedGenerator(name.clone()));
            }
            if let GenKind::Affine { linear, constant } = kind {
                for g in linear.gens().into_iter().chain(constant.gens()) {
                    if !base_ids.contains(&g) && !own.contains(&g) {
                        let offending = p.gen(g).map(|s| s.name.clone()).unwrap_or_else(|| format!("#{g}"));
                        return Err(SystemError::CrossBlock { name: name.clone(), offending });
                    }
                }
            }
            let id = match kind {
                GenKind::Free => p.add_free(name)?,
                GenKind::Affine { linear, constant } => p.add_affine(name, linear.clone(), constant.clone())?,
            };
            own.insert(id);
            homes.insert(id, BTreeSet::from([i]));
        }
    }
    let n = blocks.len();
    Ok(SystemModel { presentation: p, base: base_ids, homes, n, labels: (0..n).collect(), over: BTreeSet::new() })
}

impl SystemModel {
    /// A system from explicit homes; every generator outside `base` needs one.
    pub fn from_homes(
        presentation: Presentation,
        base: BTreeSet<u32>,
        homes: BTreeMap<u32, BTreeSet<usize>>,
        n: usize,
    ) -> Result<Self, SystemError> {
        let m = SystemModel { presentation, base, homes, n, labels: (0..n).collect(), over: BTreeSet::new() };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<(), SystemError> {
        let p = &self.presentation;
        for g in p.generators() {
            let allowed = if self.base.contains(&g.id) {
                self.base.clone()
            } else {
                let home = self.homes.get(&g.id).ok_or_else(|| SystemError::BadHome(g.name.clone()))?;
                if home.is_empty() || home.iter().any(|&i| i >= self.n) {
                    return Err(SystemError::BadHome(g.name.clone()));
                }
                self.corner_ids(home)
            };
            if let GenKind::Affine { linear, constant } = &g.kind {
                for d in linear.gens().into_iter().chain(constant.gens()) {
                    if !allowed.contains(&d) {
                        return Err(SystemError::CrossBlock {
                            name: g.name.clone(),
                            offending: p.gen(d).map(|s| s.name.clone()).unwrap_or_default(),
                        });
                    }
                }
            }
        }
        for i in 0..self.n {
            if !self.homes.values().any(|h| h.len() == 1 && h.contains(&i)) {
                return Err(SystemError::EmptyBlock(i + 1));
            }
        }
        Ok(())
    }

    /// Adjoins `σ(x) = linear·x + constant` with the given home; the rule must
    /// lie in that corner.
    pub fn adjoin(
        &mut self,
        name: &str,
        home: &[usize],
        linear: Element,
        constant: Element,
    ) -> Result<u32, SystemError> {
        let home: BTreeSet<usize> = home.iter().copied().collect();
        if home.is_empty() || home.iter().any(|&i| i >= self.n) {
            return Err(SystemError::BadHome(name.to_string()));
        }
        let corner = self.corner_ids(&home);
        for d in linear.gens().into_iter().chain(constant.gens()) {
            if !corner.contains(&d) {
                return Err(SystemError::CrossBlock {
                    name: name.to_string(),
                    offending: self.presentation.gen(d).map(|s| s.name.clone()).unwrap_or_default(),
                });
            }
        }
        let id = self.presentation.add_affine(name, linear, constant)?;
        self.homes.insert(id, home);
        Ok(id)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn base_ids(&self) -> &BTreeSet<u32> {
        &self.base
    }

    pub fn home(&self, id: u32) -> Option<&BTreeSet<usize>> {
        self.homes.get(&id)
    }

    /// Generator ids of the corner `w`.
    pub fn corner_ids(&self, w: &BTreeSet<usize>) -> BTreeSet<u32> {
        let mut out = self.base.clone();
        out.extend(self.homes.iter().filter(|(_, h)| h.is_subset(w)).map(|(id, _)| *id));
        out
    }

    pub fn corner(&self, w: &BTreeSet<usize>) -> Presentation {
        self.presentation.restrict(&self.corner_ids(w)).expect("corners are closed")
    }

    /// `{0..n} ∖ excl`.
    pub fn hat(&self, excl: &[usize]) -> BTreeSet<usize> {
        (0..self.n).filter(|i| !excl.contains(i)).collect()
    }

    pub fn in_corner(&self, x: &Element, w: &BTreeSet<usize>) -> bool {
        x.gens().is_subset(&self.corner_ids(w)) && self.presentation.contains(x)
    }

    /// The corner `w` in the original indexing, before any restriction.
    pub fn original_home(&self, w: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut h = self.over.clone();
        h.extend(w.iter().map(|&i| self.labels[i]));
        h
    }

    /// The `(n−1)`-system over the corner `{i}`: corner `w` of the result is
    /// corner `w ∪ {i}` here (after re-indexing).
    pub fn restrict_over_corner(&self, i: usize) -> SystemModel {
        assert!(self.n >= 2 && i < self.n);
        let base = self.corner_ids(&BTreeSet::from([i]));
        let reindex = |k: usize| if k > i { k - 1 } else { k };
        let homes = self
            .homes
            .iter()
            .filter(|(id, _)| !base.contains(id))
            .map(|(id, h)| (*id, h.iter().filter(|&&k| k != i).map(|&k| reindex(k)).collect()))
            .collect();
        let mut labels = self.labels.clone();
        let folded = labels.remove(i);
        let mut over = self.over.clone();
        over.insert(folded);
        SystemModel { presentation: self.presentation.clone(), base, homes, n: self.n - 1, labels, over }
    }

    /// The `(n−1)`-system on the blocks other than `i`, over the same base.
    pub fn drop_block(&self, i: usize) -> SystemModel {
        assert!(self.n >= 2 && i < self.n);
        let keep: BTreeSet<u32> = self
            .presentation
            .ids()
            .into_iter()
            .filter(|id| self.homes.get(id).map(|h| !h.contains(&i)).unwrap_or(true))
            .collect();
        let reindex = |k: usize| if k > i { k - 1 } else { k };
        let homes = self
            .homes
            .iter()
            .filter(|(id, _)| keep.contains(id))
            .map(|(id, h)| (*id, h.iter().map(|&k| reindex(k)).collect()))
            .collect();
        let mut labels = self.labels.clone();
        labels.remove(i);
        SystemModel {
            presentation: self.presentation.restrict(&keep).expect("closed"),
            base: self.base.clone(),
            homes,
            n: self.n - 1,
            labels,
            over: self.over.clone(),
        }
    }

    /// Variables of `x` lying outside corner `w`.
    fn vars_outside(&self, x: &Element, w: &BTreeSet<usize>) -> BTreeSet<VarId> {
        let ids = self.corner_ids(w);
        x.vars().into_iter().filter(|v| !ids.contains(&v.gen)).collect()
    }
}

/// `Σ_i b_i = 0` with `b_i` in the corner avoiding block `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdditiveEquation {
    pub summands: Vec<Element>,
}

impl AdditiveEquation {
    pub fn new(m: &SystemModel, summands: Vec<Element>) -> Result<Self, SystemError> {
        let eq = AdditiveEquation { summands };
        eq.validate(m)?;
        Ok(eq)
    }

    pub fn height(&self) -> usize {
        self.summands.len()
    }

    pub fn validate(&self, m: &SystemModel) -> Result<(), SystemError> {
        if self.summands.len() != m.n() {
            return Err(SystemError::Arity { expected: m.n(), got: self.summands.len() });
        }
        for (i, b) in self.summands.iter().enumerate() {
            if !m.in_corner(b, &m.hat(&[i])) {
                return Err(SystemError::Membership(i + 1));
            }
        }
        if !sum(&self.summands).is_zero() {
            return Err(SystemError::NonzeroSum);
        }
        Ok(())
    }

    /// Every summand fixed by σ.
    pub fn check_ff(&self, m: &SystemModel) -> Result<(), SystemError> {
        for (i, b) in self.summands.iter().enumerate() {
            if !m.presentation().is_fixed(b) {
                return Err(SystemError::NotFixed(i + 1));
            }
        }
        Ok(())
    }
}

fn sum(xs: &[Element]) -> Element {
    xs.iter().fold(RatFunc::zero(), |a, x| a.add(x))
}

/// `c[(i, j)]` is the summand of `b_i` lying in the corner avoiding `i`, `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub n: usize,
    pub c: BTreeMap<(usize, usize), Element>,
}

impl Decomposition {
    pub fn get(&self, i: usize, j: usize) -> Element {
        self.c.get(&(i, j)).cloned().unwrap_or_else(RatFunc::zero)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Validation {
    pub valid: bool,
    pub diagnostics: Vec<String>,
}

/// Membership, antisymmetry and recovery, all exact.
pub fn validate_decomposition(m: &SystemModel, eq: &AdditiveEquation, dec: &Decomposition) -> Validation {
    let mut diagnostics = Vec::new();
    let n = m.n();
    if dec.n != n || eq.summands.len() != n {
        diagnostics.push(format!("size mismatch: system {n}, decomposition {}, equation {}", dec.n, eq.summands.len()));
        return Validation { valid: false, diagnostics };
    }
    for i in 0..n {
        let mut total = RatFunc::zero();
        for j in (0..n).filter(|&j| j != i) {
            let c = dec.get(i, j);
            if !m.in_corner(&c, &m.hat(&[i, j])) {
                diagnostics.push(format!("membership: c[{},{}] leaves its corner", i + 1, j + 1));
            }
            if i < j && c.add(&dec.get(j, i)) != RatFunc::zero() {
                diagnostics.push(format!("antisymmetry: c[{},{}] != -c[{},{}]", i + 1, j + 1, j + 1, i + 1));
            }
            total = total.add(&c);
        }
        if total != eq.summands[i] {
            diagnostics.push(format!("recovery: summand {} is not the sum of its row", i + 1));
        }
    }
    Validation { valid: diagnostics.is_empty(), diagnostics }
}

/// Seeded rational points from growing integer boxes.
#[derive(Clone, Debug)]
pub struct GenericPoints {
    rng: ChaCha8Rng,
    pub retries: u32,
}

impl GenericPoints {
    pub fn new(seed: u64) -> Self {
        GenericPoints { rng: ChaCha8Rng::seed_from_u64(seed), retries: 32 }
    }

    fn point(&mut self, vars: &BTreeSet<VarId>, attempt: u32) -> BTreeMap<VarId, Rat> {
        let bound = 3 + 4 * attempt as i64;
        vars.iter()
            .map(|v| (*v, Rat::from_integer(self.rng.gen_range(-bound..=bound).into())))
            .collect()
    }
}

/// Writes `b_i = Σ_{j≠i} d_j` with `d_j` in the corner avoiding `i` and `j`,
/// by evaluating block `i`'s variables at a generic rational point in
/// `b_i = −Σ_{j≠i} b_j`.
pub fn specialise_step1(
    m: &SystemModel,
    eq: &AdditiveEquation,
    i: usize,
    points: &mut GenericPoints,
) -> Result<BTreeMap<usize, Element>, SystemError> {
    let outside = m.hat(&[i]);
    let mut vars = BTreeSet::new();
    for (j, b) in eq.summands.iter().enumerate() {
        if j != i {
            vars.extend(m.vars_outside(b, &outside));
        }
    }
    'attempt: for attempt in 0..points.retries {
        let pt = points.point(&vars, attempt);
        let mut out = BTreeMap::new();
        for (j, b) in eq.summands.iter().enumerate() {
            if j == i {
                continue;
            }
            match b.evaluate(&pt) {
                Ok(v) => {
                    out.insert(j, v.neg());
                }
                Err(_) => continue 'attempt,
            }
        }
        let total = out.values().fold(RatFunc::zero(), |a, x| a.add(x));
        if total != eq.summands[i] {
            return Err(SystemError::Invariant(format!("specialisation of summand {} does not sum back", i + 1)));
        }
        return Ok(out);
    }
    Err(SystemError::NoGenericPoint)
}

/// An antisymmetric decomposition of an additive equation of height ≥ 3.
pub fn decompose(
    m: &SystemModel,
    eq: &AdditiveEquation,
    points: &mut GenericPoints,
) -> Result<Decomposition, SystemError> {
    eq.validate(m)?;
    if m.n() < 3 {
        return Err(SystemError::TooSmall(3));
    }
    decompose_rec(m, eq, points)
}

fn decompose_rec(m: &SystemModel, eq: &AdditiveEquation, points: &mut GenericPoints) -> Result<Decomposition, SystemError> {
    let n = m.n();
    let mut c = BTreeMap::new();
    if n == 3 {
        let mut d: BTreeMap<(usize, usize), Element> = BTreeMap::new();
        for i in 0..3 {
            for (j, v) in specialise_step1(m, eq, i, points)? {
                d.insert((i, j), v);
            }
        }
        // δ_i = d[j][k] + d[k][j] lies in corner {i}; the three sum to zero,
        // so each lies in the base.
        let delta = |i: usize| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            d[&(j, k)].add(&d[&(k, j)])
        };
        let deltas = [delta(0), delta(1), delta(2)];
        for (i, dl) in deltas.iter().enumerate() {
            if !dl.gens().is_subset(m.base_ids()) {
                return Err(SystemError::Invariant(format!(
                    "delta_{} = {} is not in the base",
                    i + 1,
                    m.presentation().fmt(dl)
                )));
            }
        }
        c.insert((1, 2), d[&(1, 2)].sub(&deltas[0]));
        c.insert((1, 0), d[&(1, 0)].add(&deltas[0]));
        c.insert((0, 2), d[&(0, 2)].sub(&deltas[1]));
        c.insert((0, 1), d[&(0, 1)].add(&deltas[1]));
        c.insert((2, 0), d[&(2, 0)].clone());
        c.insert((2, 1), d[&(2, 1)].clone());
        return Ok(Decomposition { n, c });
    }
    let last = n - 1;
    let row = specialise_step1(m, eq, last, points)?;
    let e: Vec<Element> = (0..last).map(|j| eq.summands[j].add(&row[&j])).collect();
    let sub = m.restrict_over_corner(last);
    let rec = decompose_rec(&sub, &AdditiveEquation { summands: e }, points)?;
    c.extend(rec.c);
    for (j, v) in row {
        c.insert((j, last), v.neg());
        c.insert((last, j), v);
    }
    Ok(Decomposition { n, c })
}

/// Supplies torsor witnesses: `x` in `corner` with `σ(x) − x = target`.
pub trait TorsorWitnessOracle {
    fn witness(&mut self, corner: &Presentation, target: &Element) -> Option<Element>;
}

impl<F: FnMut(&Presentation, &Element) -> Option<Element>> TorsorWitnessOracle for F {
    fn witness(&mut self, corner: &Presentation, target: &Element) -> Option<Element> {
        self(corner, target)
    }
}

/// Answers by bounded search in the corner.
#[derive(Clone, Copy, Debug)]
pub struct SearchOracle {
    pub bounds: SearchBounds,
}

impl TorsorWitnessOracle for SearchOracle {
    fn witness(&mut self, corner: &Presentation, target: &Element) -> Option<Element> {
        match solve_twisted_bounded(corner, &TwistedSas::torsor(target.clone()), self.bounds) {
            Ok(SolveResult::Solution(x)) => Some(x),
            _ => None,
        }
    }
}

fn query(
    m: &SystemModel,
    w: &BTreeSet<usize>,
    target: &Element,
    oracle: &mut dyn TorsorWitnessOracle,
) -> Result<Element, SystemError> {
    if target.is_zero() {
        return Ok(RatFunc::zero());
    }
    let corner = m.corner(w);
    match oracle.witness(&corner, target) {
        Some(x) if m.in_corner(&x, w) && m.presentation().wp(&x) == *target => Ok(x),
        Some(_) => Err(SystemError::Invariant("oracle returned a witness that does not verify".into())),
        None => Err(SystemError::WitnessUnavailable {
            target: m.presentation().fmt(target),
            home: m.original_home(w),
            raw: target.clone(),
            corner: corner.ids(),
        }),
    }
}

/// Antisymmetric `e[(i,k)]` with `℘(d_i) = Σ_k e[(i,k)]`, each realised by
/// `witness[(i,k)]` in the corner avoiding `i` and `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct WpSystem {
    pub e: BTreeMap<(usize, usize), Element>,
    pub witness: BTreeMap<(usize, usize), Element>,
}

/// For `d_i` in the corner avoiding `i` with `Σ d_i` fixed.
pub fn wp_decompose_with_witnesses(
    m: &SystemModel,
    d: &[Element],
    oracle: &mut dyn TorsorWitnessOracle,
    points: &mut GenericPoints,
) -> Result<WpSystem, SystemError> {
    if d.len() != m.n() {
        return Err(SystemError::Arity { expected: m.n(), got: d.len() });
    }
    for (i, x) in d.iter().enumerate() {
        if !m.in_corner(x, &m.hat(&[i])) {
            return Err(SystemError::Membership(i + 1));
        }
    }
    if !m.presentation().is_fixed(&sum(d)) {
        return Err(SystemError::SumNotFixed);
    }
    wp_rec(m, d, oracle, points)
}

fn wp_rec(
    m: &SystemModel,
    d: &[Element],
    oracle: &mut dyn TorsorWitnessOracle,
    points: &mut GenericPoints,
) -> Result<WpSystem, SystemError> {
    let n = m.n();
    let p = m.presentation();
    let mut out = WpSystem { e: BTreeMap::new(), witness: BTreeMap::new() };
    if n < 2 {
        return Ok(out);
    }
    let put = |out: &mut WpSystem, i: usize, k: usize, e: Element, x: Element| {
        out.e.insert((k, i), e.neg());
        out.witness.insert((k, i), x.neg());
        out.e.insert((i, k), e);
        out.witness.insert((i, k), x);
    };
    if n == 2 {
        let e = p.wp(&d[0]);
        if !e.gens().is_subset(m.base_ids()) {
            return Err(SystemError::Invariant(format!("wp(d_1) = {} is not in the base", p.fmt(&e))));
        }
        let x = query(m, &BTreeSet::new(), &e, oracle)?;
        put(&mut out, 0, 1, e, x);
        return Ok(out);
    }
    let wps: Vec<Element> = d.iter().map(|x| p.wp(x)).collect();
    let f = decompose_rec(m, &AdditiveEquation { summands: wps }, points)?;
    let last = n - 1;
    let mut h = Vec::new();
    for k in 0..last {
        let target = f.get(last, k);
        let x = query(m, &m.hat(&[last, k]), &target, oracle)?;
        h.push(d[k].add(&x));
        put(&mut out, last, k, target, x);
    }
    let rec = wp_rec(&m.restrict_over_corner(last), &h, oracle, points)?;
    out.e.extend(rec.e);
    out.witness.extend(rec.witness);
    Ok(out)
}

/// An ff-decomposition of an ff-additive equation, following the witness
/// pipeline: decompose, split the last row's torsors with witnesses, correct
/// that row to fixed elements, recurse over the last corner.
pub fn ff_decompose_with_witnesses(
    m: &SystemModel,
    eq: &AdditiveEquation,
    oracle: &mut dyn TorsorWitnessOracle,
    points: &mut GenericPoints,
) -> Result<Decomposition, SystemError> {
    eq.validate(m)?;
    eq.check_ff(m)?;
    if m.n() < 3 {
        return Err(SystemError::TooSmall(3));
    }
    ff_rec(m, eq, oracle, points)
}

fn ff_rec(
    m: &SystemModel,
    eq: &AdditiveEquation,
    oracle: &mut dyn TorsorWitnessOracle,
    points: &mut GenericPoints,
) -> Result<Decomposition, SystemError> {
    let n = m.n();
    let p = m.presentation();
    let b = &eq.summands;
    let mut c = BTreeMap::new();
    if n == 2 {
        if !b[0].gens().is_subset(m.base_ids()) {
            return Err(SystemError::Invariant("height-2 summand outside the base".into()));
        }
        c.insert((0, 1), b[0].clone());
        c.insert((1, 0), b[1].clone());
        return Ok(Decomposition { n, c });
    }
    let d = decompose_rec(m, eq, points)?;
    let last = n - 1;
    let row: Vec<Element> = (0..last).map(|i| d.get(last, i)).collect();
    let ws = wp_rec(&m.drop_block(last), &row, oracle, points)?;
    let mut g = Vec::new();
    for i in 0..last {
        let shift = (0..last)
            .filter(|&k| k != i)
            .fold(RatFunc::zero(), |a, k| a.add(&ws.witness[&(i, k)]));
        let ci = row[i].sub(&shift);
        if !p.is_fixed(&ci) {
            return Err(SystemError::Invariant(format!("corrected c[{},{}] is not fixed", last + 1, i + 1)));
        }
        let gi = b[i].add(&ci);
        if !p.is_fixed(&gi) {
            return Err(SystemError::Invariant(format!("g_{} is not fixed", i + 1)));
        }
        g.push(gi);
        c.insert((i, last), ci.neg());
        c.insert((last, i), ci);
    }
    let rec = ff_rec(&m.restrict_over_corner(last), &AdditiveEquation { summands: g }, oracle, points)?;
    c.extend(rec.c);
    Ok(Decomposition { n, c })
}

/// Answers with `q·w` for an adjoined witness `w` of `target/q`, else asks
/// the fallback oracle.
struct KnownWitnesses<'a> {
    adjoined: &'a [(u32, Element)],
    fallback: &'a mut dyn TorsorWitnessOracle,
}

impl TorsorWitnessOracle for KnownWitnesses<'_> {
    fn witness(&mut self, corner: &Presentation, target: &Element) -> Option<Element> {
        for (id, raw) in self.adjoined {
            if corner.gen(*id).is_none() {
                continue;
            }
            if let Some(q) = target.div(raw).ok().and_then(|q| q.as_constant()) {
                return Some(RatFunc::var(VarId::new(*id, 0)).scale(&q));
            }
        }
        self.fallback.witness(corner, target)
    }
}

/// One adjoined torsor witness.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureRecord {
    pub name: String,
    /// Original block indices of the corner the witness lives over.
    pub home: BTreeSet<usize>,
    pub target: String,
}

/// Runs [`ff_decompose_with_witnesses`], adjoining a fresh witness
/// `σ(w) = w + target` over the blocked corner whenever the oracle has none,
/// for at most `max_steps` closure steps. The model grows in place.
pub fn ff_decompose_with_closure(
    m: &mut SystemModel,
    eq: &AdditiveEquation,
    oracle: &mut dyn TorsorWitnessOracle,
    seed: u64,
    max_steps: usize,
) -> Result<(Decomposition, Vec<ClosureRecord>), SystemError> {
    let mut log = Vec::new();
    let mut adjoined: Vec<(u32, Element)> = Vec::new();
    loop {
        let mut known = KnownWitnesses { adjoined: &adjoined, fallback: &mut *oracle };
        match ff_decompose_with_witnesses(m, eq, &mut known, &mut GenericPoints::new(seed)) {
            Err(SystemError::WitnessUnavailable { target, home, raw, .. }) if log.len() < max_steps => {
                let name = (1..).map(|k| format!("w{k}")).find(|n| m.presentation().id_of(n).is_none()).unwrap();
                let home_v: Vec<usize> = home.iter().copied().collect();
                let id = if home_v.is_empty() {
                    // A base torsor: widen the base itself.
                    let id = m.presentation.add_affine(&name, RatFunc::one(), raw.clone())?;
                    m.base.insert(id);
                    id
                } else {
                    m.adjoin(&name, &home_v, RatFunc::one(), raw.clone())?
                };
                adjoined.push((id, raw));
                log.push(ClosureRecord { name, home, target });
            }
            Ok(dec) => return Ok((dec, log)),
            Err(e) => return Err(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FfSearch {
    Found(Decomposition),
    NotFoundWithinBounds(SearchBounds),
}

/// Polynomial fixed elements of a presentation within bounds: monomials of
/// total degree ≤ `degree` in free generators shifted by at most `window`
/// and unshifted affine generators.
pub fn fixed_spanning_set(p: &Presentation, bounds: SearchBounds) -> Vec<Element> {
    let w = bounds.window as i64;
    let mut vars = Vec::new();
    for g in p.generators() {
        if g.is_free() {
            vars.extend((-w..=w).map(|s| VarId::new(g.id, s)));
        } else {
            vars.push(VarId::new(g.id, 0));
        }
    }
    let monos = monomials(&vars, bounds.degree);
    let diffs: Vec<RatFunc> = monos
        .iter()
        .map(|mo| {
            let x = RatFunc::from_poly(MPoly::term(mo.clone(), Rat::from_integer(1.into())));
            p.wp(&x)
        })
        .collect();
    let cleared = clear_denominators(&diffs);
    let mut rows: HashMap<Monomial, usize> = HashMap::new();
    let mut sys = SparseSystem::new();
    for poly in &cleared {
        let mut col = BTreeMap::new();
        for (mo, c) in poly.terms() {
            let next = rows.len();
            let r = *rows.entry(mo.clone()).or_insert(next);
            col.insert(r, c.clone());
        }
        sys.push_column(col);
    }
    sys.kernel_basis()
        .into_iter()
        .map(|v| {
            let poly = MPoly::from_terms(
                v.into_iter().zip(&monos).filter(|(c, _)| !c.is_zero()).map(|(c, mo)| (mo.clone(), c)),
            );
            RatFunc::from_poly(poly)
        })
        .collect()
}

/// Direct search for an ff-decomposition with every `c[(i,j)]` a rational
/// combination of the corner's bounded fixed spanning set.
pub fn ff_decompose_bounded(
    m: &SystemModel,
    eq: &AdditiveEquation,
    bounds: SearchBounds,
) -> Result<FfSearch, SystemError> {
    eq.validate(m)?;
    eq.check_ff(m)?;
    let n = m.n();
    let mut spans: BTreeMap<(usize, usize), Vec<Element>> = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            spans.insert((i, j), fixed_spanning_set(&m.corner(&m.hat(&[i, j])), bounds));
        }
    }
    // Rows: (equation, monomial) after multiplying equation i by den(b_i).
    let mut rows: HashMap<(usize, Monomial), usize> = HashMap::new();
    let mut row = |i: usize, mo: &Monomial| {
        let next = rows.len();
        *rows.entry((i, mo.clone())).or_insert(next)
    };
    let mut rhs = BTreeMap::new();
    for (i, b) in eq.summands.iter().enumerate() {
        for (mo, c) in b.num().terms() {
            rhs.insert(row(i, mo), c.clone());
        }
    }
    let mut sys = SparseSystem::new();
    let mut unknowns = Vec::new();
    for (&(i, j), span) in &spans {
        for s in span {
            let mut col: BTreeMap<usize, Rat> = BTreeMap::new();
            for (k, sign) in [(i, 1i64), (j, -1i64)] {
                let scaled = s.num().mul(eq.summands[k].den()).scale(&Rat::from_integer(sign.into()));
                for (mo, c) in scaled.terms() {
                    col.insert(row(k, mo), c.clone());
                }
            }
            sys.push_column(col);
            unknowns.push((i, j, s.clone()));
        }
    }
    let Some(x) = sys.solve(&rhs) else {
        return Ok(FfSearch::NotFoundWithinBounds(bounds));
    };
    let mut c: BTreeMap<(usize, usize), Element> = BTreeMap::new();
    for (i, j) in spans.keys() {
        c.insert((*i, *j), RatFunc::zero());
    }
    for ((i, j, s), lambda) in unknowns.iter().zip(x) {
        if !lambda.is_zero() {
            let e = c.get_mut(&(*i, *j)).unwrap();
            *e = e.add(&s.scale(&lambda));
        }
    }
    let pairs: Vec<((usize, usize), Element)> = c.iter().map(|(k, v)| (*k, v.clone())).collect();
    for ((i, j), v) in pairs {
        c.insert((j, i), v.neg());
    }
    let dec = Decomposition { n, c };
    let check = validate_decomposition(m, eq, &dec);
    if !check.valid {
        return Err(SystemError::Invariant(check.diagnostics.join("; ")));
    }
    Ok(FfSearch::Found(dec))
}

/// A random polynomial in the given variables: up to `terms` monomials of
/// degree ≤ `degree` with small integer coefficients.
pub fn random_polynomial<R: Rng>(rng: &mut R, vars: &[VarId], degree: u32, terms: usize) -> Element {
    if vars.is_empty() {
        return RatFunc::int(rng.gen_range(-3..=3));
    }
    let mut poly = MPoly::zero();
    for _ in 0..rng.gen_range(1..=terms) {
        let mut pairs = Vec::new();
        for _ in 0..rng.gen_range(0..=degree) {
            pairs.push((vars[rng.gen_range(0..vars.len())], 1));
        }
        let c: i64 = rng.gen_range(-3..=3);
        poly = poly.add(&MPoly::term(Monomial::from_pairs(pairs), Rat::from_integer(c.into())));
    }
    RatFunc::from_poly(poly)
}

/// Unshifted variables of a corner, with free generators also at shift 1.
pub fn corner_variables(m: &SystemModel, w: &BTreeSet<usize>) -> Vec<VarId> {
    let p = m.presentation();
    let mut out = Vec::new();
    for id in m.corner_ids(w) {
        out.push(VarId::new(id, 0));
        if p.is_free(id) {
            out.push(VarId::new(id, 1));
        }
    }
    out
}

/// A planted additive equation: random antisymmetric `c[(i,j)]` in the
/// pairwise corners, and `b_i = Σ_j c[(i,j)]`.
pub fn planted_equation<R: Rng>(m: &SystemModel, rng: &mut R) -> (AdditiveEquation, Decomposition) {
    let n = m.n();
    let mut c = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let vars = corner_variables(m, &m.hat(&[i, j]));
            let v = random_polynomial(rng, &vars, 2, 3);
            c.insert((j, i), v.neg());
            c.insert((i, j), v);
        }
    }
    let dec = Decomposition { n, c };
    let summands = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).fold(RatFunc::zero(), |a, j| a.add(&dec.get(i, j))))
        .collect();
    (AdditiveEquation { summands }, dec)
}
