//! Descent of solutions from a polynomial extension of degree `n`.
//!
//! If `σ(x) − e1·x = e2` has a solution in `K(t)` where `t` is algebraic of
//! degree `n` with minimal polynomial coefficients `c`, taking traces gives
//! the candidate `−c1/n` in `K`. Likewise for `σ(x) = e^z·x` the first
//! nonzero coefficient `c_k` satisfies `σ(c_k) = e^(zk)·c_k`.

use super::{check_coefficients, SasError, TwistedSas};
use crate::difference::{Element, Presentation};
use crate::rat::rat;

/// `c = [c_1, …, c_n]` are the non-leading coefficients of `X^n + c_1 X^(n−1) + …`.
/// Returns `−c_1/n` after checking it solves the equation.
pub fn descent_linear(
    p: &Presentation,
    c: &[Element],
    e1: &Element,
    e2: &Element,
) -> Result<Element, SasError> {
    let refs: Vec<&Element> = c.iter().chain([e1, e2]).collect();
    check_coefficients(p, &refs)?;
    let eq = TwistedSas::new(e1.clone(), e2.clone())?;
    let c1 = c.first().ok_or(SasError::DescentHypothesisViolated)?;
    let n = c.len() as i64;
    let x = c1.neg().scale(&(rat(1) / rat(n)));
    if eq.is_solution(p, &x) {
        Ok(x)
    } else {
        Err(SasError::DescentHypothesisViolated)
    }
}

/// Returns `(k, c_k)` for the first nonzero coefficient, `k` counted from 1,
/// after checking `σ(c_k) = e^(zk)·c_k`.
pub fn descent_multiplicative(
    p: &Presentation,
    c: &[Element],
    e: &Element,
    z: i64,
) -> Result<(usize, Element), SasError> {
    let refs: Vec<&Element> = c.iter().chain([e]).collect();
    check_coefficients(p, &refs)?;
    if e.is_zero() {
        return Err(SasError::ZeroBase);
    }
    let (i, ck) = c
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_zero())
        .ok_or(SasError::AllZeroCoefficients)?;
    let k = i + 1;
    let f = e.pow(z * k as i64).expect("e nonzero");
    if p.sigma(ck, 1) == f.mul(ck) {
        Ok((k, ck.clone()))
    } else {
        Err(SasError::DescentHypothesisViolated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratfunc::RatFunc;

    #[test]
    fn linear_descent_recovers_trace() {
        let mut p = Presentation::new();
        p.add_free("g").unwrap();
        let g = p.el("g");
        // x = g solves σ(x) − x = σ(g) − g; minimal polynomial (X − g)^2.
        let e2 = p.sigma(&g, 1).sub(&g);
        let c = vec![g.scale(&rat(-2)), g.mul(&g)];
        assert_eq!(descent_linear(&p, &c, &RatFunc::one(), &e2), Ok(g.clone()));
        assert_eq!(
            descent_linear(&p, &c, &RatFunc::one(), &g),
            Err(SasError::DescentHypothesisViolated)
        );
    }

    #[test]
    fn multiplicative_descent() {
        let p = Presentation::new();
        let c = vec![RatFunc::zero(), RatFunc::int(5)];
        assert_eq!(descent_multiplicative(&p, &c, &RatFunc::int(1), 3), Ok((2, RatFunc::int(5))));
        assert_eq!(
            descent_multiplicative(&p, &[RatFunc::zero()], &RatFunc::int(2), 1),
            Err(SasError::AllZeroCoefficients)
        );
        assert_eq!(
            descent_multiplicative(&p, &c, &RatFunc::int(2), 1),
            Err(SasError::DescentHypothesisViolated)
        );
    }
}
