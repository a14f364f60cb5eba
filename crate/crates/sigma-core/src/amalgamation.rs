//! Additive characters on fixed elements.
//!
//! A character is a homomorphism `Ψ` from the additive group of the fixed
//! field into the circle, written with angles in Q/Z. The circle is
//! divisible, so a partial assignment extends to a homomorphism exactly when
//! every integer relation among the assigned elements has angle sum 0.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::circle::CircleValue;
use crate::difference::{Element, Presentation, PresentationError};
use crate::rat::{fmt_rat, Rat};
use crate::ratfunc::RatFunc;
use crate::relations::{integer_relations, linear_relations};
use crate::sas::{certify_unsolvable, solve_twisted_bounded, AvoidedRegistry, Equation, SearchBounds, SolveResult, TwistedSas};
use crate::systems::{fixed_spanning_set, AdditiveEquation, Decomposition, SystemError, SystemModel, Validation};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AmalgError {
    #[error(transparent)]
    Presentation(#[from] PresentationError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("element {0} is not fixed")]
    NotFixed(String),
    #[error("height must be at least 1")]
    ZeroHeight,
    #[error("no certificate that T_({target}) is unrealised: {reason}")]
    MissingCertificate { target: String, reason: String },
    #[error("{element} lies in the span of the pairwise-corner fixed elements: {combination}")]
    InSpan { element: String, combination: String },
    #[error("insufficient table: {0} is not determined by the entries")]
    InsufficientTable(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharacterTable {
    presentation: Presentation,
    entries: Vec<(Element, CircleValue)>,
}

/// An integer relation among table elements whose angle sum is nonzero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Obstruction {
    pub elements: Vec<String>,
    pub relation: Vec<String>,
    pub angle_sum: CircleValue,
}

impl Obstruction {
    pub fn describe(&self) -> String {
        let terms: Vec<String> = self
            .relation
            .iter()
            .zip(&self.elements)
            .filter(|(z, _)| z.as_str() != "0")
            .map(|(z, e)| format!("({z})*({e})"))
            .collect();
        format!("{} = 0 but the angle sum is {}", terms.join(" + "), self.angle_sum)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Assign(Element, CircleValue),
    Free(Element),
}

impl Query {
    fn element(&self) -> &Element {
        match self {
            Query::Assign(x, _) | Query::Free(x) => x,
        }
    }
}

/// What the current entries say about an element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Valuation {
    /// The element is an integer combination of entries.
    Forced { value: CircleValue },
    /// Only `multiple·x` is an integer combination of entries.
    Constrained { multiple: String, value: CircleValue },
    /// Outside the rational span of the entries.
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Extension {
    Extended { table: CharacterTable, valuations: Vec<Valuation> },
    Obstruction(Obstruction),
}

impl CharacterTable {
    pub fn new(p: &Presentation) -> Self {
        CharacterTable { presentation: p.clone(), entries: Vec::new() }
    }

    /// Inconsistent tables are allowed; see [`CharacterTable::consistency`].
    pub fn with_entries(p: &Presentation, entries: Vec<(Element, CircleValue)>) -> Result<Self, AmalgError> {
        let mut t = CharacterTable::new(p);
        for (x, v) in entries {
            t.push(x, v)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, x: Element, v: CircleValue) -> Result<(), AmalgError> {
        self.check(&x)?;
        self.entries.push((x, v));
        Ok(())
    }

    fn check(&self, x: &Element) -> Result<(), AmalgError> {
        self.presentation.check_element(x)?;
        if !self.presentation.is_fixed(x) {
            return Err(AmalgError::NotFixed(self.presentation.fmt(x)));
        }
        Ok(())
    }

    pub fn entries(&self) -> &[(Element, CircleValue)] {
        &self.entries
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn describe(&self) -> Vec<(String, CircleValue)> {
        self.entries.iter().map(|(x, v)| (self.presentation.fmt(x), v.clone())).collect()
    }

    /// `None` when consistent, else a violated relation.
    pub fn consistency(&self) -> Option<Obstruction> {
        let elements: Vec<Element> = self.entries.iter().map(|(x, _)| x.clone()).collect();
        let angles: Vec<CircleValue> = self.entries.iter().map(|(_, v)| v.clone()).collect();
        violated_relation(&self.presentation, &elements, &angles)
    }

    pub fn is_consistent(&self) -> bool {
        self.consistency().is_none()
    }

    /// The value of `x` as far as the entries determine it.
    pub fn valuation(&self, x: &Element) -> Valuation {
        let mut elements: Vec<Element> = self.entries.iter().map(|(e, _)| e.clone()).collect();
        elements.push(x.clone());
        let last = elements.len() - 1;
        let basis = integer_relations(&elements);
        // Combine the basis into one relation whose last coordinate is the
        // gcd of all last coordinates.
        let mut best: Option<Vec<BigInt>> = None;
        for w in basis.into_iter().filter(|w| !w[last].is_zero()) {
            best = Some(match best {
                None => w,
                Some(v) => {
                    let eg = v[last].extended_gcd(&w[last]);
                    v.iter().zip(&w).map(|(a, b)| &eg.x * a + &eg.y * b).collect()
                }
            });
        }
        let Some(mut v) = best else {
            return Valuation::Free;
        };
        if v[last].is_negative() {
            v.iter_mut().for_each(|c| *c = -&*c);
        }
        let value = self
            .entries
            .iter()
            .zip(&v)
            .fold(CircleValue::zero(), |acc, ((_, a), z)| acc.add(&a.times(z)))
            .neg();
        if v[last].is_one() {
            Valuation::Forced { value }
        } else {
            Valuation::Constrained { multiple: v[last].to_string(), value }
        }
    }
}

fn violated_relation(p: &Presentation, elements: &[Element], angles: &[CircleValue]) -> Option<Obstruction> {
    for z in integer_relations(elements) {
        let s = angles.iter().zip(&z).fold(CircleValue::zero(), |acc, (a, c)| acc.add(&a.times(c)));
        if !s.is_zero() {
            return Some(Obstruction {
                elements: elements.iter().map(|x| p.fmt(x)).collect(),
                relation: z.iter().map(|c| c.to_string()).collect(),
                angle_sum: s,
            });
        }
    }
    None
}

/// Extends a table by assigned and freely valued elements. Assignments are
/// checked jointly; free queries then take their forced value, a root of
/// their constrained multiple, or 0.
pub fn extend_character(t: &CharacterTable, queries: &[Query]) -> Result<Extension, AmalgError> {
    for q in queries {
        t.check(q.element())?;
    }
    let mut table = t.clone();
    for q in queries {
        if let Query::Assign(x, v) = q {
            table.entries.push((x.clone(), v.clone()));
        }
    }
    if let Some(o) = table.consistency() {
        return Ok(Extension::Obstruction(o));
    }
    let mut valuations = Vec::new();
    for q in queries {
        match q {
            Query::Assign(_, v) => valuations.push(Valuation::Forced { value: v.clone() }),
            Query::Free(x) => {
                let val = table.valuation(x);
                let chosen = match &val {
                    Valuation::Forced { value } => value.clone(),
                    Valuation::Constrained { multiple, value } => {
                        let n: BigInt = multiple.parse().expect("integer");
                        CircleValue::new(value.angle() / Rat::from_integer(n))
                    }
                    Valuation::Free => CircleValue::zero(),
                };
                table.entries.push((x.clone(), chosen));
                valuations.push(val);
            }
        }
    }
    Ok(Extension::Extended { table, valuations })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ProductVerdict {
    /// `Σ Ψ(b_i) ≡ 0`, with the telescoping steps.
    Holds { justification: Vec<String> },
    Fails { angle_sum: CircleValue, justification: Vec<String> },
    Inconsistent { obstruction: Obstruction },
}

/// Checks `Σ_i Ψ(b_i) ≡ 0` for an ff-decomposed equation, reading `Ψ` off
/// the table.
pub fn product_condition(
    t: &CharacterTable,
    eq: &AdditiveEquation,
    dec: &Decomposition,
) -> Result<ProductVerdict, AmalgError> {
    if let Some(obstruction) = t.consistency() {
        return Ok(ProductVerdict::Inconsistent { obstruction });
    }
    let p = t.presentation();
    let psi = |x: &Element| match t.valuation(x) {
        Valuation::Forced { value } => Ok(value),
        _ => Err(AmalgError::InsufficientTable(p.fmt(x))),
    };
    let n = eq.summands.len();
    let mut justification = Vec::new();
    let mut total = CircleValue::zero();
    for (i, b) in eq.summands.iter().enumerate() {
        let vb = psi(b)?;
        let mut row = CircleValue::zero();
        for j in (0..n).filter(|&j| j != i) {
            row = row.add(&psi(&dec.get(i, j))?);
        }
        if row != vb {
            return Err(AmalgError::Invariant(format!("Psi(b_{}) differs from its row sum", i + 1)));
        }
        justification.push(format!("Psi(b_{}) = sum_j Psi(c[{},j]) = {}", i + 1, i + 1, vb));
        total = total.add(&vb);
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = psi(&dec.get(i, j))?.add(&psi(&dec.get(j, i))?);
            if !s.is_zero() {
                return Err(AmalgError::Invariant(format!("Psi(c[{0},{1}]) + Psi(c[{1},{0}]) = {s}", i + 1, j + 1)));
            }
        }
    }
    justification.push("Psi(c[i,j]) + Psi(c[j,i]) = 0 for all i < j, so the row sums telescope".into());
    justification.push(format!("sum_i Psi(b_i) = {total}"));
    Ok(if total.is_zero() {
        ProductVerdict::Holds { justification }
    } else {
        ProductVerdict::Fails { angle_sum: total, justification }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperplaneWitness {
    pub z: Vec<i64>,
    #[serde(skip)]
    pub b: Element,
    #[serde(rename = "b")]
    pub b_display: String,
}

/// Smallest-height integer `z ≠ 0` with `|z_i| ≤ height` and `Σ z_i·x_i`
/// in the bounded fixed span of `subfield`. Complete over the height box
/// relative to that span.
pub fn hyperplane_search(
    p: &Presentation,
    x: &[Element],
    height: u32,
    subfield: &Presentation,
    bounds: SearchBounds,
) -> Result<Option<HyperplaneWitness>, AmalgError> {
    if height == 0 {
        return Err(AmalgError::ZeroHeight);
    }
    for e in x {
        p.check_element(e)?;
        if !p.is_fixed(e) {
            return Err(AmalgError::NotFixed(p.fmt(e)));
        }
    }
    let n = x.len();
    if n == 0 {
        return Ok(None);
    }
    let span = fixed_spanning_set(subfield, bounds);
    let mut all: Vec<Element> = x.to_vec();
    all.extend(span);
    // Projections of the relations to the x coordinates span the space W of
    // admissible z.
    let projected: Vec<Vec<Rat>> = linear_relations(&all).into_iter().map(|r| r[..n].to_vec()).collect();
    let w = row_basis(projected, n);
    if w.is_empty() {
        return Ok(None);
    }
    let r = w.len();
    let m = height as i64;
    for h in 1..=m {
        let mut found: Vec<Vec<i64>> = Vec::new();
        let mut coords = vec![-h; r];
        loop {
            if coords.iter().any(|c| c.abs() == h) {
                // z = Σ coords_k · w_k since w is in reduced form.
                let z: Vec<Rat> = (0..n)
                    .map(|i| {
                        w.iter().zip(&coords).fold(Rat::zero(), |a, (row, c)| a + &row[i] * Rat::from_integer((*c).into()))
                    })
                    .collect();
                if z.iter().all(|c| c.is_integer() && c.abs() <= Rat::from_integer(m.into())) {
                    let mut zi: Vec<i64> = z.iter().map(|c| c.to_integer().try_into().unwrap()).collect();
                    if let Some(f) = zi.iter().find(|c| **c != 0) {
                        if *f < 0 {
                            zi.iter_mut().for_each(|c| *c = -*c);
                        }
                    }
                    found.push(zi);
                }
            }
            let mut k = 0;
            while k < r {
                if coords[k] < h {
                    coords[k] += 1;
                    break;
                }
                coords[k] = -h;
                k += 1;
            }
            if k == r {
                break;
            }
        }
        if let Some(z) = found.into_iter().min_by_key(|z| (z.iter().map(|c| c.abs()).max().unwrap(), z.clone())) {
            let b = x.iter().zip(&z).fold(RatFunc::zero(), |a, (e, c)| a.add(&e.scale(&Rat::from_integer((*c).into()))));
            if !b.gens().is_subset(&subfield.ids()) {
                return Err(AmalgError::Invariant("hyperplane constant outside the subfield".into()));
            }
            let b_display = p.fmt(&b);
            return Ok(Some(HyperplaneWitness { z, b, b_display }));
        }
    }
    Ok(None)
}

/// Reduced row echelon basis of the row space.
fn row_basis(rows: Vec<Vec<Rat>>, ncols: usize) -> Vec<Vec<Rat>> {
    let mut rows = rows;
    let piv = crate::linalg::rref(&mut rows, ncols);
    rows.truncate(piv.len());
    rows
}

/// A 3-amalgamation instance over torsor witnesses `α_1, α_2, α_3` of `𝔗_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeAmalgInstance {
    pub presentation: Presentation,
    pub table: CharacterTable,
    pub r: [CircleValue; 3],
    pub verdict: AmalgVerdict,
    pub certificate_equations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AmalgVerdict {
    Solvable,
    Obstruction { obstruction: Obstruction },
}

impl AmalgVerdict {
    pub fn is_solvable(&self) -> bool {
        matches!(self, AmalgVerdict::Solvable)
    }
}

/// The forced relation `(α1−α2) + (α2−α3) = α1−α3` against the values
/// `r = (r12, r13, r23)`. Requires a certificate that `𝔗_a` has no witness
/// in `p`.
pub fn build_3amalg_obstruction(
    p: &Presentation,
    a: &Element,
    r: [CircleValue; 3],
    registry: Option<&AvoidedRegistry>,
) -> Result<ThreeAmalgInstance, AmalgError> {
    p.check_element(a)?;
    let eq = Equation::Twisted(TwistedSas::torsor(a.clone()));
    let cert = certify_unsolvable(p, &eq, registry);
    let Some(cert) = cert.certificate() else {
        let reason = match cert {
            crate::sas::CertifyOutcome::Unknown(r) => r,
            _ => unreachable!(),
        };
        return Err(AmalgError::MissingCertificate { target: p.fmt(a), reason });
    };
    let mut q = p.clone();
    let mut alpha = Vec::new();
    for i in 1..=3 {
        let mut name = format!("alpha{i}");
        while q.id_of(&name).is_some() {
            name.push('_');
        }
        q.add_affine(&name, RatFunc::one(), a.clone())?;
        alpha.push(q.el(&name));
    }
    let d = |i: usize, j: usize| alpha[i].sub(&alpha[j]);
    let queries = [
        Query::Assign(d(0, 1), r[0].clone()),
        Query::Assign(d(0, 2), r[1].clone()),
        Query::Assign(d(1, 2), r[2].clone()),
    ];
    let (table, verdict) = match extend_character(&CharacterTable::new(&q), &queries)? {
        Extension::Extended { table, .. } => (table, AmalgVerdict::Solvable),
        Extension::Obstruction(o) => {
            let mut table = CharacterTable::new(&q);
            for qq in &queries {
                if let Query::Assign(x, v) = qq {
                    table.push(x.clone(), v.clone())?;
                }
            }
            (table, AmalgVerdict::Obstruction { obstruction: o })
        }
    };
    Ok(ThreeAmalgInstance {
        presentation: q,
        table,
        r,
        verdict,
        certificate_equations: cert.derived_equations(),
    })
}

/// Characters on the corners avoiding each block, agreeing on the pairwise
/// corners, whose union is inconsistent.
#[derive(Clone, Debug, PartialEq)]
pub struct FailingInstance {
    /// The distinguished corner, 0-based.
    pub k: usize,
    pub pairwise_span: usize,
    pub tables: Vec<CharacterTable>,
    /// The value `−Σ_{i≠k} Ψ(b_i)` a solution would force on `b_k`.
    pub required: CircleValue,
    pub assigned: CircleValue,
    pub obstruction: Obstruction,
}

/// For `b_k` outside the span of the bounded fixed elements of the corners
/// avoiding `k` and some `j`, builds per-corner characters that agree on
/// pairwise corners but give `Σ Ψ(b_i) ≠ 0`.
pub fn build_failing_instance(
    m: &SystemModel,
    eq: &AdditiveEquation,
    k: usize,
    bounds: SearchBounds,
) -> Result<FailingInstance, AmalgError> {
    eq.validate(m)?;
    eq.check_ff(m)?;
    let n = m.n();
    if k >= n {
        return Err(AmalgError::System(SystemError::Arity { expected: n, got: k + 1 }));
    }
    let p = m.presentation();
    let mut spans: BTreeMap<(usize, usize), Vec<Element>> = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            spans.insert((i, j), fixed_spanning_set(&m.corner(&m.hat(&[i, j])), bounds));
        }
    }
    let adjacent = |i: usize| -> Vec<Element> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for ((a, b), s) in &spans {
            if *a == i || *b == i {
                for x in s {
                    if seen.insert(p.fmt(x)) {
                        out.push(x.clone());
                    }
                }
            }
        }
        out
    };
    let around_k = adjacent(k);
    let bk = &eq.summands[k];
    let mut with_b = around_k.clone();
    with_b.push(bk.clone());
    if let Some(rel) = linear_relations(&with_b).into_iter().find(|r| !r.last().unwrap().is_zero()) {
        let lead = rel.last().unwrap().clone();
        let combination = around_k
            .iter()
            .zip(&rel)
            .filter(|(_, c)| !c.is_zero())
            .map(|(x, c)| format!("({})*({})", fmt_rat(&(-c.clone() / &lead)), p.fmt(x)))
            .collect::<Vec<_>>();
        let combination = if combination.is_empty() { "0".to_string() } else { combination.join(" + ") };
        return Err(AmalgError::InSpan { element: p.fmt(bk), combination });
    }
    // Ψ on all pairwise spans: 0 throughout, which is consistent.
    let mut shared = CharacterTable::new(p);
    let mut all_pairs = Vec::new();
    for s in spans.values() {
        for x in s {
            if !all_pairs.iter().any(|y: &Element| y == x) {
                all_pairs.push(x.clone());
            }
        }
    }
    let free: Vec<Query> = all_pairs.iter().map(|x| Query::Free(x.clone())).collect();
    let shared_entries = match extend_character(&shared, &free)? {
        Extension::Extended { table, .. } => table.entries,
        Extension::Obstruction(o) => return Err(AmalgError::Invariant(o.describe())),
    };
    shared.entries = shared_entries;
    let restricted = |i: usize| {
        let adj = adjacent(i);
        let entries = shared.entries.iter().filter(|(x, _)| adj.contains(x)).cloned().collect();
        CharacterTable { presentation: p.clone(), entries }
    };
    let mut tables = vec![None; n];
    let mut required = CircleValue::zero();
    for i in (0..n).filter(|&i| i != k) {
        let t = match extend_character(&restricted(i), &[Query::Free(eq.summands[i].clone())])? {
            Extension::Extended { table, .. } => table,
            Extension::Obstruction(o) => return Err(AmalgError::Invariant(o.describe())),
        };
        required = required.add(&t.entries.last().unwrap().1.neg());
        tables[i] = Some(t);
    }
    let assigned = required.add(&CircleValue::new(Rat::new(1.into(), 2.into())));
    let tk = match extend_character(&restricted(k), &[Query::Assign(bk.clone(), assigned.clone())])? {
        Extension::Extended { table, .. } => table,
        Extension::Obstruction(o) => {
            return Err(AmalgError::Invariant(format!("b_{} turned out constrained: {}", k + 1, o.describe())))
        }
    };
    tables[k] = Some(tk);
    let tables: Vec<CharacterTable> = tables.into_iter().map(|t| t.unwrap()).collect();
    let mut union = CharacterTable::new(p);
    for t in &tables {
        for (x, v) in &t.entries {
            if !union.entries.iter().any(|(y, w)| y == x && w == v) {
                union.entries.push((x.clone(), v.clone()));
            }
        }
    }
    let obstruction = union
        .consistency()
        .ok_or_else(|| AmalgError::Invariant("joint character unexpectedly consistent".into()))?;
    Ok(FailingInstance { k, pairwise_span: all_pairs.len(), tables, required, assigned, obstruction })
}

/// Exact check of an n-σ-AS witness set: `b̃ = Σ b̃_i = Σ b_i`, memberships,
/// and `σ(x_i) − x_i = b_i` with `x_i` in the corner avoiding `i`.
pub fn check_n_sas_witness(
    m: &SystemModel,
    btilde: &Element,
    summands: &BTreeMap<usize, Element>,
    rewrite: &BTreeMap<usize, Element>,
    witnesses: &BTreeMap<usize, Element>,
) -> Validation {
    let p = m.presentation();
    let n = m.n();
    let mut diagnostics = Vec::new();
    let total = |map: &BTreeMap<usize, Element>| map.values().fold(RatFunc::zero(), |a, x| a.add(x));
    if total(summands) != *btilde {
        diagnostics.push("sum: the summands do not add up to the target".to_string());
    }
    if total(rewrite) != *btilde {
        diagnostics.push("sum: the rewrite does not add up to the target".to_string());
    }
    for i in 0..n {
        let corner = m.hat(&[i]);
        for (what, map) in [("summand", summands), ("rewrite", rewrite), ("witness", witnesses)] {
            match map.get(&i) {
                Some(x) if !m.in_corner(x, &corner) => {
                    diagnostics.push(format!("membership: {what} {} leaves its corner", i + 1))
                }
                None if what != "summand" => diagnostics.push(format!("missing: {what} {}", i + 1)),
                _ => {}
            }
        }
        if let (Some(x), Some(b)) = (witnesses.get(&i), rewrite.get(&i)) {
            if p.wp(x) != *b {
                diagnostics.push(format!("witness: wp(x_{}) != b_{}", i + 1, i + 1));
            }
        }
    }
    for i in summands.keys().chain(rewrite.keys()).chain(witnesses.keys()) {
        if *i >= n {
            diagnostics.push(format!("index {} out of range", i + 1));
        }
    }
    Validation { valid: diagnostics.is_empty(), diagnostics }
}

/// Outcome of a bounded n-σ-AS witness search.
#[derive(Clone, Debug, PartialEq)]
pub enum NSasSearch {
    Found { rewrite: BTreeMap<usize, Element>, witnesses: BTreeMap<usize, Element> },
    NotFoundWithinBounds { candidates_tried: usize },
}

/// Tries rewrites `b_i = b̃_i + e_i` with `e_i` from `shifts` (the last one
/// balancing the sum) and searches each corner for a torsor witness.
pub fn search_n_sas_witness(
    m: &SystemModel,
    summands: &BTreeMap<usize, Element>,
    shifts: &[Element],
    bounds: SearchBounds,
) -> NSasSearch {
    let n = m.n();
    let p = m.presentation();
    let mut tried = 0;
    let mut choice = vec![0usize; n.saturating_sub(1)];
    let get = |i: usize| summands.get(&i).cloned().unwrap_or_else(RatFunc::zero);
    loop {
        tried += 1;
        let mut rewrite = BTreeMap::new();
        let mut acc = RatFunc::zero();
        for (i, &c) in choice.iter().enumerate() {
            let e = &shifts[c];
            acc = acc.add(e);
            rewrite.insert(i, get(i).add(e));
        }
        rewrite.insert(n - 1, get(n - 1).sub(&acc));
        let mut witnesses = BTreeMap::new();
        let mut ok = true;
        for (i, b) in &rewrite {
            let w = m.hat(&[*i]);
            if !m.in_corner(b, &w) {
                ok = false;
                break;
            }
            match solve_twisted_bounded(&m.corner(&w), &TwistedSas::torsor(b.clone()), bounds) {
                Ok(SolveResult::Solution(x)) if p.wp(&x) == *b => {
                    witnesses.insert(*i, x);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return NSasSearch::Found { rewrite, witnesses };
        }
        let mut k = 0;
        while k < choice.len() {
            choice[k] += 1;
            if choice[k] < shifts.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
        if k == choice.len() || shifts.is_empty() {
            return NSasSearch::NotFoundWithinBounds { candidates_tried: tried };
        }
    }
}

/// A random table for oracle cross checks.
#[derive(Clone, Debug)]
pub struct RandomCharacterInstance {
    pub table: CharacterTable,
    /// Integer coordinates of each entry over independent fixed elements.
    pub coords: Vec<Vec<BigInt>>,
}

/// `dim` entries over fixed elements `u_k − t`: a few unit vectors, the rest
/// combinations with coefficients in `−2..=2`, angles in `(1/12)Z/Z`.
/// Dependent angles are the combined value or, half the time, perturbed.
/// Generating relations have entries of size at most 2.
pub fn random_character_instance<R: rand::Rng>(rng: &mut R, dim: usize) -> RandomCharacterInstance {
    let mut p = Presentation::new();
    p.add_affine("t", RatFunc::one(), RatFunc::one()).expect("fresh name");
    let free = rng.gen_range(1..=dim.max(1));
    for k in 0..free {
        p.add_affine(&format!("u{k}"), RatFunc::one(), RatFunc::one()).expect("fresh name");
    }
    let t = p.el("t");
    let basis: Vec<Element> = (0..free).map(|k| p.el(&format!("u{k}")).sub(&t)).collect();
    let twelfth = |n: i64| CircleValue::new(Rat::new(n.into(), 12.into()));
    let mut table = CharacterTable::new(&p);
    let mut coords = Vec::new();
    for i in 0..dim {
        let (z, v) = if i < free {
            let mut z = vec![0i64; free];
            z[i] = 1;
            (z, twelfth(rng.gen_range(0..12)))
        } else {
            let z: Vec<i64> = (0..free).map(|_| rng.gen_range(-2..=2)).collect();
            let mut v = CircleValue::zero();
            for (c, (_, a)) in z.iter().zip(&table.entries) {
                v = v.add(&a.times(&BigInt::from(*c)));
            }
            if rng.gen_bool(0.5) {
                v = v.add(&twelfth(rng.gen_range(1..12)));
            }
            (z, v)
        };
        let x = z.iter().zip(&basis).fold(RatFunc::zero(), |a, (c, b)| a.add(&b.scale(&Rat::from_integer((*c).into()))));
        table.entries.push((x, v));
        coords.push(z.into_iter().map(BigInt::from).collect());
    }
    RandomCharacterInstance { table, coords }
}

/// Brute-force consistency over a box of integer combinations, for cross
/// checks against [`CharacterTable::consistency`].
pub fn brute_force_consistent(
    coords: &[Vec<BigInt>],
    angles: &[CircleValue],
    radius: i64,
) -> bool {
    let k = coords.len();
    if k == 0 {
        return true;
    }
    let dim = coords[0].len();
    let mut z = vec![-radius; k];
    loop {
        let relation = (0..dim).all(|d| {
            z.iter().zip(coords).fold(BigInt::zero(), |a, (c, v)| a + BigInt::from(*c) * &v[d]).is_zero()
        });
        if relation {
            let s = z.iter().zip(angles).fold(CircleValue::zero(), |a, (c, v)| a.add(&v.times(&BigInt::from(*c))));
            if !s.is_zero() {
                return false;
            }
        }
        let mut i = 0;
        while i < k {
            if z[i] < radius {
                z[i] += 1;
                break;
            }
            z[i] = -radius;
            i += 1;
        }
        if i == k {
            return true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::difference::GenKind;
    use crate::rat::{frac, rat};
    use crate::systems::build_system;

    fn cv(a: i64, b: i64) -> CircleValue {
        CircleValue::new(frac(a, b))
    }

    /// `u`, `v`, `w` torsors of 1 over `t`; `u − t` etc. are fixed.
    fn fixed_world() -> (Presentation, Vec<Element>) {
        let mut p = Presentation::new();
        for name in ["t", "u", "v", "w"] {
            p.add_affine(name, RatFunc::one(), RatFunc::one()).unwrap();
        }
        let t = p.el("t");
        let f = ["u", "v", "w"].iter().map(|n| p.el(n).sub(&t)).collect();
        (p, f)
    }

    #[test]
    fn forced_sum() {
        let (p, f) = fixed_world();
        let t = CharacterTable::with_entries(&p, vec![(f[0].clone(), cv(1, 3)), (f[1].clone(), cv(1, 4))]).unwrap();
        match extend_character(&t, &[Query::Free(f[0].add(&f[1]))]).unwrap() {
            Extension::Extended { valuations, .. } => {
                assert_eq!(valuations, vec![Valuation::Forced { value: cv(7, 12) }])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn doubling_obstruction() {
        let (p, f) = fixed_world();
        let t = CharacterTable::with_entries(&p, vec![(f[0].clone(), cv(1, 2))]).unwrap();
        let q = [Query::Assign(f[0].scale(&rat(2)), cv(1, 3))];
        assert!(matches!(extend_character(&t, &q).unwrap(), Extension::Obstruction(_)));
    }

    #[test]
    fn halves_are_constrained() {
        let (p, f) = fixed_world();
        let t = CharacterTable::with_entries(&p, vec![(f[0].clone(), cv(1, 3))]).unwrap();
        let half = f[0].scale(&frac(1, 2));
        assert_eq!(t.valuation(&half), Valuation::Constrained { multiple: "2".into(), value: cv(1, 3) });
        assert_eq!(t.valuation(&f[1]), Valuation::Free);
    }

    #[test]
    fn non_fixed_rejected() {
        let (p, _) = fixed_world();
        let t = CharacterTable::new(&p);
        assert!(matches!(extend_character(&t, &[Query::Free(p.el("u"))]), Err(AmalgError::NotFixed(_))));
    }

    #[test]
    fn hyperplanes() {
        let (p, f) = fixed_world();
        let sub = p.restrict(&BTreeSet::new()).unwrap();
        let b = SearchBounds { degree: 1, window: 0 };
        let x = [f[0].clone(), f[0].scale(&rat(2)).add(&RatFunc::int(3))];
        let w = hyperplane_search(&p, &x, 3, &sub, b).unwrap().unwrap();
        assert_eq!(w.z, vec![2, -1]);
        assert_eq!(w.b, RatFunc::int(-3));
        assert_eq!(hyperplane_search(&p, &[f[0].clone(), f[1].clone()], 5, &sub, b).unwrap(), None);
        let w = hyperplane_search(&p, &[f[0].clone(), f[0].clone()], 1, &sub, b).unwrap().unwrap();
        assert_eq!((w.z, w.b), (vec![1, -1], RatFunc::zero()));
    }

    #[test]
    fn three_amalgamation() {
        let mut p = Presentation::new();
        p.add_free("g").unwrap();
        let g = p.el("g");
        let inst = build_3amalg_obstruction(&p, &g, [cv(1, 3), cv(2, 3), cv(1, 3)], None).unwrap();
        assert!(inst.verdict.is_solvable());
        let inst = build_3amalg_obstruction(&p, &g, [cv(1, 2), cv(0, 1), cv(1, 3)], None).unwrap();
        assert!(!inst.verdict.is_solvable());
        let g1 = p.sigma(&g, 1).sub(&g);
        assert!(matches!(
            build_3amalg_obstruction(&p, &g1, [cv(0, 1), cv(0, 1), cv(0, 1)], None),
            Err(AmalgError::MissingCertificate { .. })
        ));
    }

    fn torsor_system(n: usize) -> SystemModel {
        let mut base = Presentation::new();
        base.add_affine("t", RatFunc::one(), RatFunc::one()).unwrap();
        let blocks = (1..=n)
            .map(|i| vec![(format!("u{i}"), GenKind::Affine { linear: RatFunc::one(), constant: RatFunc::one() })])
            .collect();
        build_system(base, blocks).unwrap()
    }

    #[test]
    fn product_condition_on_decomposed() {
        let m = torsor_system(3);
        let p = m.presentation().clone();
        let t = p.el("t");
        let f = |i: usize| p.el(&format!("u{i}")).sub(&t);
        let mut c = BTreeMap::new();
        c.insert((0, 1), f(3));
        c.insert((0, 2), f(2).scale(&rat(2)));
        c.insert((1, 2), RatFunc::int(1));
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let v: Element = c[&(i, j)].neg();
            c.insert((j, i), v);
        }
        let dec = Decomposition { n: 3, c };
        let b = (0..3).map(|i| (0..3).filter(|&j| j != i).fold(RatFunc::zero(), |a, j| a.add(&dec.get(i, j)))).collect();
        let eq = AdditiveEquation::new(&m, b).unwrap();
        let table = CharacterTable::with_entries(
            &p,
            vec![(f(2), cv(1, 5)), (f(3), cv(1, 7)), (RatFunc::one(), cv(0, 1))],
        )
        .unwrap();
        assert!(matches!(product_condition(&table, &eq, &dec).unwrap(), ProductVerdict::Holds { .. }));
        let mut bad = table.clone();
        bad.push(dec.get(1, 0), cv(1, 7)).unwrap();
        assert!(matches!(product_condition(&bad, &eq, &dec).unwrap(), ProductVerdict::Inconsistent { .. }));
        let sparse = CharacterTable::new(&p);
        assert!(matches!(product_condition(&sparse, &eq, &dec), Err(AmalgError::InsufficientTable(_))));
    }

    #[test]
    fn failing_instance_refuses_decomposable() {
        let m = torsor_system(3);
        let zero = AdditiveEquation::new(&m, vec![RatFunc::zero(); 3]).unwrap();
        let b = SearchBounds { degree: 1, window: 0 };
        assert!(matches!(build_failing_instance(&m, &zero, 0, b), Err(AmalgError::InSpan { .. })));
    }

    #[test]
    fn n_sas_witness_checks() {
        let m = torsor_system(2);
        let p = m.presentation();
        let (u1, u2) = (p.el("u1"), p.el("u2"));
        // b̃ = 2: b_1 = 1 realised by u2 in corner {2}, b_2 = 1 by u1.
        let bt = RatFunc::int(2);
        let s: BTreeMap<usize, Element> = [(0, RatFunc::one()), (1, RatFunc::one())].into();
        let good: BTreeMap<usize, Element> = [(0, u2.clone()), (1, u1.clone())].into();
        assert!(check_n_sas_witness(&m, &bt, &s, &s, &good).valid);
        let bad: BTreeMap<usize, Element> = [(0, u1), (1, u2)].into();
        let v = check_n_sas_witness(&m, &bt, &s, &s, &bad);
        assert!(v.diagnostics.iter().any(|d| d.starts_with("membership")));
    }
}
