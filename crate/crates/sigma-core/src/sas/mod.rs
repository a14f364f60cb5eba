//! Twisted σ-Artin–Schreier equations `σ(x) − e1·x = e2` and multiplicative
//! equations `σ(x) = e^z·x`.
//!
//! Three kinds of answer are produced. Bounded search over a rational
//! ansatz ([`solve_twisted_bounded`], [`solve_multiplicative_bounded`]), an
//! exact decision over purely free presentations ([`decide_free_base`]),
//! and replayable non-existence certificates built from leading-coefficient
//! comparisons down a stack of affine extensions ([`certify_unsolvable`]).

mod certify;
mod descent;
mod freebase;
mod search;

use std::fmt;

use num_traits::One;
use serde::Serialize;
use thiserror::Error;

use crate::difference::{Element, Presentation};
use crate::poly::VarId;
use crate::ratfunc::RatFunc;

pub use certify::{
    certify_unsolvable, reduce_over_affine_extension, AvoidedRegistry, CertNode, CertStep,
    Certificate, CertifyOutcome, DegreeCase, ExponentSet, Goal, Reduced, RegisteredFamily,
    Sample,
};
pub use descent::{descent_linear, descent_multiplicative};
pub use freebase::{decide_free_base, shift_windows, FreeBaseDecision};
pub use search::{solve_multiplicative_bounded, solve_twisted_bounded};
pub(crate) use search::{clear_denominators, monomials};

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
pub enum SasError {
    #[error("e1 must be nonzero")]
    ZeroTwist,
    #[error("z must be nonzero")]
    ZeroExponent,
    #[error("e must be nonzero")]
    ZeroBase,
    #[error("coefficient not in presentation: {0}")]
    NotInPresentation(String),
    #[error("descent hypothesis violated")]
    DescentHypothesisViolated,
    #[error("coefficient list has no nonzero entry")]
    AllZeroCoefficients,
    #[error("not in normal position: {0}")]
    NotInNormalPosition(String),
    #[error("presentation has no affine top generator")]
    NoAffineTop,
    #[error("coefficients outside the shape handled by the reduction: {0}")]
    UnsupportedShape(String),
    #[error("presentation has a non-free generator")]
    NotFreeBase,
}

/// `σ(x) − e1·x = e2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TwistedSas {
    pub e1: Element,
    pub e2: Element,
}

impl TwistedSas {
    pub fn new(e1: Element, e2: Element) -> Result<Self, SasError> {
        if e1.is_zero() {
            return Err(SasError::ZeroTwist);
        }
        Ok(TwistedSas { e1, e2 })
    }

    /// The torsor equation `σ(x) − x = a`.
    pub fn torsor(a: Element) -> Self {
        TwistedSas { e1: RatFunc::one(), e2: a }
    }

    pub fn is_solution(&self, p: &Presentation, x: &Element) -> bool {
        p.sigma(x, 1).sub(&self.e1.mul(x)) == self.e2
    }
}

/// `σ(x) = e^z·x` with `x ≠ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiplicativeSas {
    pub e: Element,
    pub z: i64,
}

impl MultiplicativeSas {
    pub fn new(e: Element, z: i64) -> Result<Self, SasError> {
        if z == 0 {
            return Err(SasError::ZeroExponent);
        }
        if e.is_zero() {
            return Err(SasError::ZeroBase);
        }
        Ok(MultiplicativeSas { e, z })
    }

    pub fn factor(&self) -> Element {
        self.e.pow(self.z).expect("e nonzero")
    }

    pub fn is_solution(&self, p: &Presentation, x: &Element) -> bool {
        !x.is_zero() && p.sigma(x, 1) == self.factor().mul(x)
    }
}

/// Either equation kind, as accepted by the certifier and the free-base
/// decision.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Equation {
    Twisted(TwistedSas),
    Multiplicative(MultiplicativeSas),
}

impl Equation {
    pub fn is_solution(&self, p: &Presentation, x: &Element) -> bool {
        match self {
            Equation::Twisted(t) => t.is_solution(p, x),
            Equation::Multiplicative(m) => m.is_solution(p, x),
        }
    }

    pub fn display(&self, p: &Presentation) -> String {
        self.lin().display(p, "x")
    }

    fn lin(&self) -> Lin {
        match self {
            Equation::Twisted(t) => Lin::Twisted { e1: t.e1.clone(), e2: t.e2.clone() },
            Equation::Multiplicative(m) => Lin::Homog { f: m.factor() },
        }
    }

    pub fn coefficients(&self) -> Vec<&Element> {
        match self {
            Equation::Twisted(t) => vec![&t.e1, &t.e2],
            Equation::Multiplicative(m) => vec![&m.e],
        }
    }
}

/// Working form shared by the solvers: an inhomogeneous twisted equation or
/// the homogeneous `σ(y) = f·y`, `y ≠ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Lin {
    Twisted { e1: Element, e2: Element },
    Homog { f: Element },
}

impl Lin {
    pub(crate) fn coefficients(&self) -> Vec<&Element> {
        match self {
            Lin::Twisted { e1, e2 } => vec![e1, e2],
            Lin::Homog { f } => vec![f],
        }
    }

    pub(crate) fn is_solution(&self, p: &Presentation, x: &Element) -> bool {
        match self {
            Lin::Twisted { e1, e2 } => p.sigma(x, 1).sub(&e1.mul(x)) == *e2,
            Lin::Homog { f } => !x.is_zero() && p.sigma(x, 1) == f.mul(x),
        }
    }

    pub(crate) fn display(&self, p: &Presentation, y: &str) -> String {
        match self {
            Lin::Twisted { e1, e2 } => {
                format!("s({y}) - {}{y} = {}", coeff_prefix(p, e1), p.fmt(e2))
            }
            Lin::Homog { f } => format!("s({y}) = {}{y}", coeff_prefix(p, f)),
        }
    }
}

fn coeff_prefix(p: &Presentation, c: &Element) -> String {
    if c.is_one() {
        String::new()
    } else if c.num().num_terms() == 1 && c.den().is_one() {
        format!("{}*", p.fmt(c))
    } else {
        format!("({})*", p.fmt(c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SearchBounds {
    pub degree: u32,
    pub window: u32,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds { degree: 6, window: 4 }
    }
}

impl fmt::Display for SearchBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D={}, W={}", self.degree, self.window)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveResult {
    Solution(Element),
    NoSolutionWithinBounds(SearchBounds),
    Unsolvable(Certificate),
}

impl SolveResult {
    pub fn solution(&self) -> Option<&Element> {
        match self {
            SolveResult::Solution(x) => Some(x),
            _ => None,
        }
    }

    pub fn verdict(&self) -> &'static str {
        match self {
            SolveResult::Solution(_) => "Solution",
            SolveResult::NoSolutionWithinBounds(_) => "NoSolutionWithinBounds",
            SolveResult::Unsolvable(_) => "Unsolvable",
        }
    }
}

/// `x = v^k` with coefficient 1 and `k ≠ 0`.
pub(crate) fn as_var_power(x: &RatFunc) -> Option<(VarId, i64)> {
    let single = |p: &crate::poly::MPoly| -> Option<Option<(VarId, u32)>> {
        if p.num_terms() != 1 {
            return None;
        }
        let (m, c) = p.leading()?;
        if !c.is_one() {
            return None;
        }
        match m.pairs() {
            [] => Some(None),
            [(v, e)] => Some(Some((*v, *e))),
            _ => None,
        }
    };
    match (single(x.num())?, single(x.den())?) {
        (Some((v, e)), None) => Some((v, e as i64)),
        (None, Some((v, e))) => Some((v, -(e as i64))),
        _ => None,
    }
}

pub(crate) fn check_coefficients(p: &Presentation, cs: &[&Element]) -> Result<(), SasError> {
    for c in cs {
        p.check_element(c)
            .map_err(|e| SasError::NotInPresentation(e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn var_power_recognition() {
        let g = RatFunc::var(VarId::new(0, 0));
        assert_eq!(as_var_power(&g), Some((VarId::new(0, 0), 1)));
        assert_eq!(as_var_power(&g.inv().unwrap().pow(2).unwrap()), Some((VarId::new(0, 0), -2)));
        assert_eq!(as_var_power(&g.scale(&crate::rat::rat(2))), None);
        assert_eq!(as_var_power(&RatFunc::one()), None);
    }

    #[test]
    fn rejects_degenerate_equations() {
        assert_eq!(MultiplicativeSas::new(RatFunc::int(2), 0), Err(SasError::ZeroExponent));
        assert_eq!(TwistedSas::new(RatFunc::zero(), RatFunc::one()), Err(SasError::ZeroTwist));
    }
}
