//! Sparse multivariate polynomials over `Rat` in shift-indexed variables.
//!
//! Terms are kept in a `BTreeMap` keyed by [`Monomial`], whose `Ord` is the
//! graded-lexicographic order over [`VarId`]: total degree first, then the
//! exponent of the largest variable, then the next largest, and so on. The
//! leading term is therefore the last entry of the map.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::rat::{fmt_rat, rat, Rat};

/// `σ^shift(generator)`. Ordered by generator declaration index, then shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarId {
    pub gen: u32,
    pub shift: i64,
}

impl VarId {
    pub fn new(gen: u32, shift: i64) -> Self {
        VarId { gen, shift }
    }

    pub fn shifted(self, k: i64) -> Self {
        VarId {
            gen: self.gen,
            shift: self.shift + k,
        }
    }
}

/// Power product of variables, stored sorted by variable with positive exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(VarId, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: VarId) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_pairs(mut pairs: Vec<(VarId, u32)>) -> Self {
        pairs.retain(|&(_, e)| e > 0);
        pairs.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(VarId, u32)> = Vec::with_capacity(pairs.len());
        for (v, e) in pairs {
            match out.last_mut() {
                Some((w, f)) if *w == v => *f += e,
                _ => out.push((v, e)),
            }
        }
        Monomial(out)
    }

    pub fn pairs(&self) -> &[(VarId, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent(&self, v: VarId) -> u32 {
        self.0
            .binary_search_by_key(&v, |&(w, _)| w)
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, ea) = self.0[i];
            let (b, eb) = other.0[j];
            match a.cmp(&b) {
                Ordering::Less => {
                    out.push((a, ea));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b, eb));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for &(v, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 < v {
                return None;
            }
            if j < other.0.len() && other.0[j].0 == v {
                let f = other.0[j].1;
                if f > e {
                    return None;
                }
                if e > f {
                    out.push((v, e - f));
                }
                j += 1;
            } else {
                out.push((v, e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Componentwise minimum of exponents.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::new();
        for &(v, e) in &self.0 {
            let f = other.exponent(v);
            if f > 0 {
                out.push((v, e.min(f)));
            }
        }
        Monomial(out)
    }

    pub fn map_vars(&self, f: impl Fn(VarId) -> VarId) -> Monomial {
        Monomial::from_pairs(self.0.iter().map(|&(v, e)| (f(v), e)).collect())
    }

    pub fn without(&self, v: VarId) -> Monomial {
        Monomial(self.0.iter().copied().filter(|&(w, _)| w != v).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let (mut i, mut j) = (self.0.len(), other.0.len());
        while i > 0 && j > 0 {
            let (a, ea) = self.0[i - 1];
            let (b, eb) = other.0[j - 1];
            match a.cmp(&b) {
                Ordering::Greater => return Ordering::Greater,
                Ordering::Less => return Ordering::Less,
                Ordering::Equal => match ea.cmp(&eb) {
                    Ordering::Equal => {
                        i -= 1;
                        j -= 1;
                    }
                    o => return o,
                },
            }
        }
        (i > 0).cmp(&(j > 0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Polynomial with no stored zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct MPoly {
    terms: BTreeMap<Monomial, Rat>,
}

impl MPoly {
    pub fn zero() -> Self {
        MPoly::default()
    }

    pub fn one() -> Self {
        MPoly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        MPoly::term(Monomial::one(), c)
    }

    pub fn int(n: i64) -> Self {
        MPoly::constant(rat(n))
    }

    pub fn var(v: VarId) -> Self {
        MPoly::term(Monomial::var(v), Rat::one())
    }

    pub fn term(m: Monomial, c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        MPoly { terms }
    }

    pub fn from_terms(iter: impl IntoIterator<Item = (Monomial, Rat)>) -> Self {
        let mut p = MPoly::zero();
        for (m, c) in iter {
            p.add_term(m, c);
        }
        p
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rat)> + ExactSizeIterator {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.keys().next().unwrap().is_one())
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .next()
                .map(|(m, c)| m.is_one() && c.is_one())
                .unwrap_or(false)
    }

    /// The constant value when the polynomial is constant.
    pub fn as_constant(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            Some(Rat::zero())
        } else if self.is_constant() {
            self.terms.values().next().cloned()
        } else {
            None
        }
    }

    pub fn coeff(&self, m: &Monomial) -> Rat {
        self.terms.get(m).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn leading(&self) -> Option<(&Monomial, &Rat)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coeff(&self) -> Rat {
        self.leading().map(|(_, c)| c.clone()).unwrap_or_else(Rat::zero)
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.leading().map(|(m, _)| m.degree())
    }

    /// Lowest total degree among the terms.
    pub fn low_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree()).min()
    }

    pub fn add_term(&mut self, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.terms
            .keys()
            .flat_map(|m| m.pairs().iter().map(|&(v, _)| v))
            .collect()
    }

    pub fn max_var(&self) -> Option<VarId> {
        self.terms
            .keys()
            .filter_map(|m| m.pairs().last().map(|&(v, _)| v))
            .max()
    }

    pub fn contains_var(&self, v: VarId) -> bool {
        self.terms.keys().any(|m| m.exponent(v) > 0)
    }

    pub fn degree_in(&self, v: VarId) -> u32 {
        self.terms.keys().map(|m| m.exponent(v)).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &Rat) -> MPoly {
        if c.is_zero() {
            return MPoly::zero();
        }
        MPoly {
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> MPoly {
        MPoly {
            terms: self.terms.iter().map(|(n, a)| (n.mul(m), a.clone())).collect(),
        }
    }

    pub fn add(&self, other: &MPoly) -> MPoly {
        let (big, small) = if self.terms.len() >= other.terms.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> MPoly {
        MPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn mul(&self, other: &MPoly) -> MPoly {
        if self.is_zero() || other.is_zero() {
            return MPoly::zero();
        }
        if let Some(c) = self.as_constant() {
            return other.scale(&c);
        }
        if let Some(c) = other.as_constant() {
            return self.scale(&c);
        }
        let mut acc: BTreeMap<Monomial, Rat> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m = m1.mul(m2);
                let c = c1 * c2;
                match acc.entry(m) {
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(c);
                    }
                    std::collections::btree_map::Entry::Occupied(mut e) => {
                        *e.get_mut() += c;
                    }
                }
            }
        }
        acc.retain(|_, c| !c.is_zero());
        MPoly { terms: acc }
    }

    pub fn pow(&self, e: u32) -> MPoly {
        let mut result = MPoly::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Divides by the leading coefficient. Zero stays zero.
    pub fn monic(&self) -> MPoly {
        match self.leading() {
            None => MPoly::zero(),
            Some((_, c)) if c.is_one() => self.clone(),
            Some((_, c)) => self.scale(&(Rat::one() / c)),
        }
    }

    /// Renames variables. The map must be injective and order preserving on
    /// the variables present, otherwise the caller has to re-sort (this
    /// function always rebuilds the map, so correctness does not depend on it).
    pub fn map_vars(&self, f: impl Fn(VarId) -> VarId) -> MPoly {
        MPoly::from_terms(self.terms.iter().map(|(m, c)| (m.map_vars(&f), c.clone())))
    }

    /// Exact quotient `self / d`, or `None` if `d` does not divide `self`.
    pub fn div_exact(&self, d: &MPoly) -> Option<MPoly> {
        if d.is_zero() {
            return None;
        }
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&(Rat::one() / c)));
        }
        let (ld, lc) = d.leading().map(|(m, c)| (m.clone(), c.clone()))?;
        let mut r = self.clone();
        let mut q = MPoly::zero();
        while let Some((lm, lcr)) = r.leading().map(|(m, c)| (m.clone(), c.clone())) {
            let t = lm.div(&ld)?;
            let c = lcr / &lc;
            q.add_term(t.clone(), c.clone());
            for (m, a) in &d.terms {
                r.add_term(m.mul(&t), -(a * &c));
            }
        }
        Some(q)
    }

    /// Coefficients with respect to `v`: `self = Σ_k coeffs[k]·v^k`.
    pub fn coefficients_in(&self, v: VarId) -> Vec<MPoly> {
        let deg = self.degree_in(v) as usize;
        let mut out = vec![MPoly::zero(); deg + 1];
        for (m, c) in &self.terms {
            let e = m.exponent(v) as usize;
            out[e].add_term(m.without(v), c.clone());
        }
        out
    }

    pub fn from_coefficients(v: VarId, coeffs: &[MPoly]) -> MPoly {
        let mut out = MPoly::zero();
        for (k, c) in coeffs.iter().enumerate() {
            let vk = if k == 0 {
                Monomial::one()
            } else {
                Monomial::from_pairs(vec![(v, k as u32)])
            };
            for (m, a) in &c.terms {
                out.add_term(m.mul(&vk), a.clone());
            }
        }
        out
    }

    /// Substitutes rational values for some variables; others stay symbolic.
    pub fn eval_partial(&self, assignment: &BTreeMap<VarId, Rat>) -> MPoly {
        let mut out = MPoly::zero();
        for (m, c) in &self.terms {
            let mut coeff = c.clone();
            let mut rest = Vec::new();
            for &(v, e) in m.pairs() {
                match assignment.get(&v) {
                    Some(val) => coeff *= num_traits::pow(val.clone(), e as usize),
                    None => rest.push((v, e)),
                }
            }
            out.add_term(Monomial::from_pairs(rest), coeff);
        }
        out
    }

    /// Content with respect to `v`: gcd of the coefficients in `v`.
    pub fn content_in(&self, v: VarId) -> MPoly {
        let mut g = MPoly::zero();
        for c in self.coefficients_in(v) {
            if c.is_zero() {
                continue;
            }
            g = gcd(&g, &c);
            if g.is_constant() {
                return MPoly::one();
            }
        }
        g
    }

    pub fn fmt_with(&self, name: &dyn Fn(VarId) -> String) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (idx, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c < &Rat::zero();
            let mag = if neg { -c.clone() } else { c.clone() };
            if idx == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mon = m
                .pairs()
                .iter()
                .map(|&(v, e)| {
                    if e == 1 {
                        name(v)
                    } else {
                        format!("{}^{}", name(v), e)
                    }
                })
                .collect::<Vec<_>>()
                .join("*");
            if m.is_one() {
                out.push_str(&fmt_rat(&mag));
            } else if mag.is_one() {
                out.push_str(&mon);
            } else if mag.is_integer() {
                out.push_str(&format!("{}*{}", fmt_rat(&mag), mon));
            } else {
                out.push_str(&format!("({})*{}", fmt_rat(&mag), mon));
            }
        }
        out
    }
}

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.fmt_with(&|v: VarId| format!("x{}[{}]", v.gen, v.shift));
        f.write_str(&s)
    }
}

/// Pseudo-remainder of `a` by `b` as polynomials in `v` (both given as
/// coefficient vectors, `b` of positive degree).
fn prem(a: &[MPoly], b: &[MPoly]) -> Vec<MPoly> {
    let db = b.len() - 1;
    let lb = &b[db];
    let mut r: Vec<MPoly> = a.to_vec();
    trim(&mut r);
    while r.len() > db && !(r.len() == 1 && r[0].is_zero()) {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        let shift = dr - db;
        let mut next: Vec<MPoly> = r.iter().map(|c| c.mul(lb)).collect();
        for (k, bk) in b.iter().enumerate() {
            next[k + shift] = next[k + shift].sub(&bk.mul(&lr));
        }
        next.pop();
        trim(&mut next);
        r = next;
    }
    r
}

fn trim(p: &mut Vec<MPoly>) {
    while p.len() > 1 && p.last().map(|c| c.is_zero()).unwrap_or(false) {
        p.pop();
    }
    if p.is_empty() {
        p.push(MPoly::zero());
    }
}

fn primitive_part(coeffs: &[MPoly]) -> Vec<MPoly> {
    let mut g = MPoly::zero();
    for c in coeffs {
        if !c.is_zero() {
            g = gcd(&g, c);
            if g.is_constant() {
                break;
            }
        }
    }
    let mut out: Vec<MPoly> = if g.is_constant() {
        coeffs.to_vec()
    } else {
        coeffs.iter().map(|c| c.div_exact(&g).expect("content divides")).collect()
    };
    // Keep numbers small: make the leading coefficient's leading coefficient 1.
    if let Some(last) = out.last() {
        let lc = last.leading_coeff();
        if !lc.is_zero() && !lc.is_one() {
            let inv = Rat::one() / lc;
            out = out.iter().map(|c| c.scale(&inv)).collect();
        }
    }
    out
}

fn monomial_gcd_with(m: &Monomial, p: &MPoly) -> MPoly {
    let mut g = m.clone();
    for (n, _) in p.terms() {
        g = g.gcd(n);
        if g.is_one() {
            break;
        }
    }
    MPoly::term(g, Rat::one())
}

/// Monic greatest common divisor. `gcd(0, 0) = 0`.
pub fn gcd(a: &MPoly, b: &MPoly) -> MPoly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return MPoly::one();
    }
    if a.num_terms() == 1 {
        return monomial_gcd_with(a.leading().unwrap().0, b);
    }
    if b.num_terms() == 1 {
        return monomial_gcd_with(b.leading().unwrap().0, a);
    }
    if a.monic() == b.monic() {
        return a.monic();
    }
    let va = a.max_var().unwrap();
    let vb = b.max_var().unwrap();
    let v = va.max(vb);
    if !a.contains_var(v) {
        return gcd(a, &b.content_in(v));
    }
    if !b.contains_var(v) {
        return gcd(&a.content_in(v), b);
    }
    let ca = a.content_in(v);
    let cb = b.content_in(v);
    let c = gcd(&ca, &cb);
    let pa = a.div_exact(&ca).expect("content divides");
    let pb = b.div_exact(&cb).expect("content divides");
    let mut f = pa.coefficients_in(v);
    let mut g = pb.coefficients_in(v);
    if f.len() < g.len() {
        std::mem::swap(&mut f, &mut g);
    }
    loop {
        let r = prem(&f, &g);
        if r.len() == 1 && r[0].is_zero() {
            break;
        }
        if r.len() == 1 {
            // Nonzero remainder of degree 0: the primitive parts are coprime.
            return c.monic();
        }
        f = g;
        g = primitive_part(&r);
    }
    let g = primitive_part(&g);
    MPoly::from_coefficients(v, &g).mul(&c).monic()
}

pub fn lcm(a: &MPoly, b: &MPoly) -> MPoly {
    if a.is_zero() || b.is_zero() {
        return MPoly::zero();
    }
    let g = gcd(a, b);
    a.div_exact(&g).expect("gcd divides").mul(b).monic()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> MPoly {
        MPoly::var(VarId::new(0, 0))
    }
    fn y() -> MPoly {
        MPoly::var(VarId::new(1, 0))
    }

    #[test]
    fn grlex_degree_dominates() {
        let a = Monomial::from_pairs(vec![(VarId::new(0, 0), 2)]);
        let b = Monomial::from_pairs(vec![(VarId::new(1, 0), 1)]);
        assert!(a > b);
        let c = Monomial::from_pairs(vec![(VarId::new(0, 0), 1)]);
        assert!(b > c, "larger variable wins at equal degree");
    }

    #[test]
    fn exact_division_and_failure() {
        let p = x().mul(&y()).add(&x());
        assert_eq!(p.div_exact(&x()), Some(y().add(&MPoly::one())));
        assert_eq!(p.div_exact(&y()), None);
    }

    #[test]
    fn gcd_of_products() {
        let f = x().add(&y());
        let g = x().sub(&MPoly::int(2));
        let h = y().mul(&y()).add(&MPoly::int(1));
        let a = f.mul(&g);
        let b = f.mul(&h).scale(&rat(3));
        assert_eq!(gcd(&a, &b), f.monic());
        assert_eq!(gcd(&g, &h), MPoly::one());
    }

    #[test]
    fn gcd_with_repeated_factor() {
        let f = x().mul(&y()).sub(&MPoly::one());
        let a = f.pow(2).mul(&x());
        let b = f.mul(&y().pow(3));
        assert_eq!(gcd(&a, &b), f.monic());
    }

    #[test]
    fn coefficients_round_trip() {
        let p = x().pow(3).mul(&y()).add(&x()).add(&y().scale(&rat(5)));
        let v = VarId::new(0, 0);
        assert_eq!(MPoly::from_coefficients(v, &p.coefficients_in(v)), p);
    }
}
