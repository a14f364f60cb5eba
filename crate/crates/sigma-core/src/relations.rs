//! Q-linear relations among rational functions.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::One;

use crate::linalg::{integer_kernel, nullspace};
use crate::poly::{lcm, MPoly, Monomial};
use crate::rat::Rat;
use crate::ratfunc::RatFunc;

/// Basis of `{q ∈ Q^k : Σ q_i·elements_i = 0}`.
///
/// Clears to a common denominator, reads numerators as coordinate vectors
/// over the monomial basis and takes the kernel.
pub fn linear_relations(elements: &[RatFunc]) -> Vec<Vec<Rat>> {
    let k = elements.len();
    if k == 0 {
        return Vec::new();
    }
    let rows = coordinates(elements);
    let mut t = vec![vec![Rat::default(); k]; rows.first().map_or(0, |r| r.len())];
    for (j, r) in rows.iter().enumerate() {
        for (i, c) in r.iter().enumerate() {
            t[i][j] = c.clone();
        }
    }
    nullspace(&t, k)
}

/// Basis of the lattice `{z ∈ Z^k : Σ z_i·elements_i = 0}`.
pub fn integer_relations(elements: &[RatFunc]) -> Vec<Vec<BigInt>> {
    if elements.is_empty() {
        return Vec::new();
    }
    let rows = coordinates(elements);
    let mut scale = BigInt::one();
    for c in rows.iter().flatten() {
        scale = scale.lcm(c.denom());
    }
    let ints: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|r| r.iter().map(|c| (c * Rat::from_integer(scale.clone())).to_integer()).collect())
        .collect();
    if ints[0].is_empty() {
        // Every element is zero.
        return (0..elements.len())
            .map(|i| (0..elements.len()).map(|j| if i == j { BigInt::one() } else { BigInt::default() }).collect())
            .collect();
    }
    integer_kernel(&ints)
}

/// One coordinate row per element over a shared monomial basis, after
/// clearing to a common denominator.
fn coordinates(elements: &[RatFunc]) -> Vec<Vec<Rat>> {
    let k = elements.len();
    let mut common = MPoly::one();
    for e in elements {
        if !e.den().is_one() {
            common = lcm(&common, e.den());
        }
    }
    let numerators: Vec<MPoly> = elements
        .iter()
        .map(|e| {
            if e.is_zero() {
                MPoly::zero()
            } else {
                let cof = common.div_exact(e.den()).expect("lcm is a multiple");
                e.num().mul(&cof)
            }
        })
        .collect();
    let mut index: BTreeMap<&Monomial, usize> = BTreeMap::new();
    for p in &numerators {
        for (m, _) in p.terms() {
            let n = index.len();
            index.entry(m).or_insert(n);
        }
    }
    let mut rows = vec![vec![Rat::default(); index.len()]; k];
    for (j, p) in numerators.iter().enumerate() {
        for (m, c) in p.terms() {
            rows[j][index[m]] = c.clone();
        }
    }
    rows
}

/// Applies a relation tuple; zero exactly when the tuple is a relation.
pub fn combine(elements: &[RatFunc], q: &[Rat]) -> RatFunc {
    elements
        .iter()
        .zip(q)
        .fold(RatFunc::zero(), |acc, (e, c)| acc.add(&e.scale(c)))
}
