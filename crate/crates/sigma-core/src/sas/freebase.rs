//! Exact decisions over presentations whose generators are all free.
//!
//! Extremal-shift argument: if `x` involves `g[k]` with largest shift `M`,
//! then `σ(x)` involves `g[M+1]`, while `e1·x + e2` only reaches
//! `max(M, S)` where `S` is the largest shift in the coefficients. So
//! `M ≤ S − 1`, and symmetrically the smallest shift of `x` is at least the
//! smallest shift in the coefficients. When every such window is empty the
//! solution is a rational constant, and the constant case is exact.

use std::collections::BTreeMap;

use num_traits::{One, Signed};
use serde::Serialize;

use super::certify::{CertNode, CertStep, Certificate, Goal};
use super::search::window_search;
use super::{check_coefficients, Equation, Lin, SasError, SearchBounds};
use crate::difference::{Element, Presentation};
use crate::ratfunc::RatFunc;

#[derive(Clone, Debug, PartialEq)]
pub enum FreeBaseDecision {
    Solvable(Element),
    Unsolvable(Certificate),
    /// The support window is nonempty and the residual search within the
    /// default bounds found nothing.
    Undecided(SearchBounds),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WindowRecord {
    pub generator: String,
    /// Smallest and largest shift of the generator in the coefficients.
    pub support: (i64, i64),
    /// Shifts a solution may use; `None` when empty.
    pub window: Option<(i64, i64)>,
}

/// Nonempty support windows per free generator id.
pub fn shift_windows(coeffs: &[&Element]) -> BTreeMap<u32, (i64, i64)> {
    window_records(coeffs)
        .into_iter()
        .filter_map(|(id, _, w)| w.map(|w| (id, w)))
        .collect()
}

fn window_records(coeffs: &[&Element]) -> Vec<(u32, (i64, i64), Option<(i64, i64)>)> {
    let mut support: BTreeMap<u32, (i64, i64)> = BTreeMap::new();
    for c in coeffs {
        for v in c.vars() {
            let e = support.entry(v.gen).or_insert((v.shift, v.shift));
            e.0 = e.0.min(v.shift);
            e.1 = e.1.max(v.shift);
        }
    }
    support
        .into_iter()
        .map(|(id, (lo, hi))| {
            let w = if lo <= hi - 1 { Some((lo, hi - 1)) } else { None };
            (id, (lo, hi), w)
        })
        .collect()
}

/// Constant solutions of a working equation: `Ok(x)` or the reason none exists.
pub(crate) fn constant_case(lin: &Lin) -> Result<Element, String> {
    match lin {
        Lin::Twisted { e1, e2 } => {
            if e1.is_one() {
                if e2.is_zero() {
                    Ok(RatFunc::zero())
                } else {
                    Err(format!("constant case: q - q = 0 cannot equal a nonzero right-hand side"))
                }
            } else {
                let q = e2.div(&RatFunc::one().sub(e1)).expect("e1 != 1");
                if q.is_constant() {
                    Ok(q)
                } else {
                    Err("constant case: q = e2/(1 - e1) is not a rational constant".to_string())
                }
            }
        }
        Lin::Homog { f } => {
            if f.is_one() {
                Ok(RatFunc::one())
            } else {
                Err("constant case: s(q) = q for rational q, but the factor is not 1".to_string())
            }
        }
    }
}

/// Free-base certificate node for a goal, if the extremal-shift argument
/// refutes it outright.
pub(crate) fn free_base_node(p: &Presentation, goal: &Goal) -> Option<CertNode> {
    if !p.all_free() {
        return None;
    }
    let coeffs: Vec<&Element> = goal.coefficients();
    let recs = window_records(&coeffs);
    if recs.iter().any(|(_, _, w)| w.is_some()) {
        return None;
    }
    let reason = match goal {
        Goal::Twisted { e1, e2 } => {
            constant_case(&Lin::Twisted { e1: e1.clone(), e2: e2.clone() }).err()?
        }
        Goal::MultFamily { e, exps } => {
            if !exps.excludes_zero() {
                return None;
            }
            match e.as_constant() {
                Some(q) if q.abs().is_one() => return None,
                Some(_) => "constant case: |e| != 1, so e^z != 1 for z != 0".to_string(),
                None => "constant case: e is not constant, so e^z != 1 for z != 0".to_string(),
            }
        }
    };
    let windows = recs
        .into_iter()
        .map(|(id, support, window)| WindowRecord {
            generator: p.gen(id).map(|g| g.name.clone()).unwrap_or_default(),
            support,
            window,
        })
        .collect();
    Some(CertNode::new(
        p,
        goal.clone(),
        CertStep::ExtremalShift { windows, constant_case: reason },
        Vec::new(),
    ))
}

/// Decides `eq` over an all-free presentation.
pub fn decide_free_base(p: &Presentation, eq: &Equation) -> Result<FreeBaseDecision, SasError> {
    if !p.all_free() {
        return Err(SasError::NotFreeBase);
    }
    check_coefficients(p, &eq.coefficients())?;
    if let Equation::Twisted(t) = eq {
        if t.e2.is_zero() {
            return Ok(FreeBaseDecision::Solvable(RatFunc::zero()));
        }
    }
    let lin = eq.lin();
    let windows = shift_windows(&lin.coefficients());
    if windows.is_empty() {
        return Ok(match constant_case(&lin) {
            Ok(x) => FreeBaseDecision::Solvable(x),
            Err(_) => {
                let goal = Goal::from_equation(eq);
                let root = free_base_node(p, &goal).expect("empty windows refute");
                FreeBaseDecision::Unsolvable(Certificate::new(p, eq, root))
            }
        });
    }
    let bounds = SearchBounds::default();
    Ok(match window_search(p, &lin, &windows, bounds) {
        Some(x) => FreeBaseDecision::Solvable(x),
        None => FreeBaseDecision::Undecided(bounds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sas::{MultiplicativeSas, TwistedSas};

    fn base() -> Presentation {
        let mut p = Presentation::new();
        p.add_free("g").unwrap();
        p
    }

    #[test]
    fn windows_from_support() {
        let p = base();
        let g = p.el("g");
        let w = shift_windows(&[&RatFunc::one(), &p.sigma(&g, 2).sub(&p.sigma(&g, 1))]);
        assert_eq!(w.get(&0), Some(&(1, 1)));
        assert!(shift_windows(&[&g]).is_empty());
    }

    #[test]
    fn avoided_families() {
        let p = base();
        let g = p.el("g");
        for z in [-3, -2, -1, 1, 2, 3] {
            let eq = Equation::Multiplicative(MultiplicativeSas::new(g.clone(), z).unwrap());
            assert!(matches!(decide_free_base(&p, &eq), Ok(FreeBaseDecision::Unsolvable(_))));
        }
        let gi = g.inv().unwrap();
        for (e1, e2) in [(g.clone(), g.clone()), (gi.clone(), gi)] {
            let eq = Equation::Twisted(TwistedSas::new(e1, e2).unwrap());
            assert!(matches!(decide_free_base(&p, &eq), Ok(FreeBaseDecision::Unsolvable(_))));
        }
    }

    #[test]
    fn telescoping_is_solvable() {
        let p = base();
        let g = p.el("g");
        let eq = Equation::Twisted(TwistedSas::torsor(p.sigma(&g, 1).sub(&g)));
        assert_eq!(decide_free_base(&p, &eq), Ok(FreeBaseDecision::Solvable(g)));
    }

    #[test]
    fn rational_factor_over_q() {
        let p = Presentation::new();
        let eq = Equation::Multiplicative(MultiplicativeSas::new(RatFunc::int(3), 1).unwrap());
        assert!(matches!(decide_free_base(&p, &eq), Ok(FreeBaseDecision::Unsolvable(_))));
    }
}
