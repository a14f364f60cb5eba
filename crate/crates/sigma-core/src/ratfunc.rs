//! Canonical rational functions.
//!
//! A [`RatFunc`] is `num/den` with `gcd(num, den) = 1` and the leading
//! coefficient of `den` (graded-lex) equal to 1, so structural equality is
//! equality of field elements.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};

use crate::error::ExactError;
use crate::poly::{gcd, MPoly, VarId};
use crate::rat::Rat;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RatFunc {
    num: MPoly,
    den: MPoly,
}

impl Default for RatFunc {
    fn default() -> Self {
        RatFunc::zero()
    }
}

/// Unique canonical representative of `num/den`.
pub fn normalize(num: MPoly, den: MPoly) -> Result<RatFunc, ExactError> {
    if den.is_zero() {
        return Err(ExactError::DivisionByZero);
    }
    if num.is_zero() {
        return Ok(RatFunc::zero());
    }
    if let Some(c) = den.as_constant() {
        return Ok(RatFunc {
            num: num.scale(&(Rat::one() / c)),
            den: MPoly::one(),
        });
    }
    let g = gcd(&num, &den);
    let (num, den) = if g.is_one() {
        (num, den)
    } else {
        (
            num.div_exact(&g).expect("gcd divides numerator"),
            den.div_exact(&g).expect("gcd divides denominator"),
        )
    };
    Ok(RatFunc::from_coprime(num, den))
}

impl RatFunc {
    /// Builds from a coprime pair, only rescaling so that `den` is monic.
    fn from_coprime(num: MPoly, den: MPoly) -> RatFunc {
        let lc = den.leading_coeff();
        if lc.is_one() {
            RatFunc { num, den }
        } else {
            let inv = Rat::one() / lc;
            RatFunc {
                num: num.scale(&inv),
                den: den.scale(&inv),
            }
        }
    }

    pub fn zero() -> Self {
        RatFunc {
            num: MPoly::zero(),
            den: MPoly::one(),
        }
    }

    pub fn one() -> Self {
        RatFunc::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        RatFunc {
            num: MPoly::constant(c),
            den: MPoly::one(),
        }
    }

    pub fn int(n: i64) -> Self {
        RatFunc::constant(crate::rat::rat(n))
    }

    pub fn var(v: VarId) -> Self {
        RatFunc::from_poly(MPoly::var(v))
    }

    pub fn from_poly(p: MPoly) -> Self {
        RatFunc {
            num: p,
            den: MPoly::one(),
        }
    }

    pub fn num(&self) -> &MPoly {
        &self.num
    }

    pub fn den(&self) -> &MPoly {
        &self.den
    }

    pub fn into_parts(self) -> (MPoly, MPoly) {
        (self.num, self.den)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_constant(&self) -> Option<Rat> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        let mut v = self.num.vars();
        v.extend(self.den.vars());
        v
    }

    pub fn gens(&self) -> BTreeSet<u32> {
        self.vars().into_iter().map(|v| v.gen).collect()
    }

    /// `deg num − deg den`; the degree valuation at infinity. `None` for zero.
    pub fn degree(&self) -> Option<i64> {
        Some(self.num.total_degree()? as i64 - self.den.total_degree().unwrap_or(0) as i64)
    }

    pub fn add(&self, other: &RatFunc) -> RatFunc {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.den == other.den {
            let num = self.num.add(&other.num);
            if self.den.is_one() {
                return RatFunc::from_poly(num);
            }
            return normalize(num, self.den.clone()).expect("nonzero denominator");
        }
        if other.den.is_one() {
            return RatFunc::from_coprime(self.num.add(&other.num.mul(&self.den)), self.den.clone());
        }
        if self.den.is_one() {
            return RatFunc::from_coprime(self.num.mul(&other.den).add(&other.num), other.den.clone());
        }
        let g = gcd(&self.den, &other.den);
        let d1 = self.den.div_exact(&g).expect("gcd divides");
        let d2 = other.den.div_exact(&g).expect("gcd divides");
        let num = self.num.mul(&d2).add(&other.num.mul(&d1));
        let den = self.den.mul(&d2);
        normalize(num, den).expect("nonzero denominator")
    }

    pub fn neg(&self) -> RatFunc {
        RatFunc {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &RatFunc) -> RatFunc {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &RatFunc) -> RatFunc {
        if self.is_zero() || other.is_zero() {
            return RatFunc::zero();
        }
        if let Some(c) = self.as_constant() {
            return other.scale(&c);
        }
        if let Some(c) = other.as_constant() {
            return self.scale(&c);
        }
        let g1 = gcd(&self.num, &other.den);
        let g2 = gcd(&other.num, &self.den);
        let n1 = self.num.div_exact(&g1).expect("gcd divides");
        let d2 = other.den.div_exact(&g1).expect("gcd divides");
        let n2 = other.num.div_exact(&g2).expect("gcd divides");
        let d1 = self.den.div_exact(&g2).expect("gcd divides");
        RatFunc::from_coprime(n1.mul(&n2), d1.mul(&d2))
    }

    pub fn scale(&self, c: &Rat) -> RatFunc {
        if c.is_zero() {
            return RatFunc::zero();
        }
        RatFunc {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn inv(&self) -> Result<RatFunc, ExactError> {
        if self.is_zero() {
            return Err(ExactError::DivisionByZero);
        }
        Ok(RatFunc::from_coprime(self.den.clone(), self.num.clone()))
    }

    pub fn div(&self, other: &RatFunc) -> Result<RatFunc, ExactError> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, e: i64) -> Result<RatFunc, ExactError> {
        if e < 0 {
            return self.inv()?.pow(-e);
        }
        let e = e as u32;
        Ok(RatFunc::from_coprime(self.num.pow(e), self.den.pow(e)))
    }

    /// Substitutes rationals for some variables; the rest stay symbolic.
    pub fn evaluate(&self, assignment: &BTreeMap<VarId, Rat>) -> Result<RatFunc, ExactError> {
        let den = self.den.eval_partial(assignment);
        if den.is_zero() {
            return Err(ExactError::PoleHit);
        }
        normalize(self.num.eval_partial(assignment), den)
    }

    /// Renames variables (for example a uniform shift of free generators).
    /// The result is renormalized, so the map need not preserve the order.
    pub fn map_vars(&self, f: impl Fn(VarId) -> VarId) -> RatFunc {
        normalize(self.num.map_vars(&f), self.den.map_vars(&f)).expect("renaming keeps den nonzero")
    }

    /// Renaming that is known to preserve the variable order, so the canonical
    /// form carries over without a gcd.
    pub fn map_vars_monotone(&self, f: impl Fn(VarId) -> VarId) -> RatFunc {
        RatFunc::from_coprime(self.num.map_vars(&f), self.den.map_vars(&f))
    }

    pub fn fmt_with(&self, name: &dyn Fn(VarId) -> String) -> String {
        let n = self.num.fmt_with(name);
        if self.den.is_one() {
            return n;
        }
        let d = self.den.fmt_with(name);
        let n = if self.num.num_terms() > 1 { format!("({n})") } else { n };
        let d = if self.den.num_terms() > 1 || !self.den.leading_coeff().is_one() {
            format!("({d})")
        } else {
            d
        };
        format!("{n}/{d}")
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.fmt_with(&|v: VarId| format!("x{}[{}]", v.gen, v.shift));
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{frac, rat};

    fn x() -> MPoly {
        MPoly::var(VarId::new(0, 0))
    }

    #[test]
    fn constant_gcd_removal() {
        let f = normalize(x().scale(&rat(2)), MPoly::int(4)).unwrap();
        assert_eq!(f.num(), &x().scale(&frac(1, 2)));
        assert!(f.den().is_one());
    }

    #[test]
    fn common_factor_cancels() {
        let num = x().mul(&x()).sub(&MPoly::one());
        let den = x().sub(&MPoly::one());
        let f = normalize(num, den).unwrap();
        assert_eq!(f, RatFunc::from_poly(x().add(&MPoly::one())));
    }

    #[test]
    fn zero_denominator_rejected() {
        assert_eq!(normalize(x(), MPoly::zero()), Err(ExactError::DivisionByZero));
    }

    #[test]
    fn pole_hit_on_evaluation() {
        let f = RatFunc::one().div(&RatFunc::from_poly(x().sub(&MPoly::one()))).unwrap();
        let mut a = BTreeMap::new();
        a.insert(VarId::new(0, 0), rat(1));
        assert_eq!(f.evaluate(&a), Err(ExactError::PoleHit));
    }

    #[test]
    fn partial_evaluation_keeps_symbols() {
        let y = MPoly::var(VarId::new(1, 0));
        let f = RatFunc::from_poly(x().add(&y));
        let mut a = BTreeMap::new();
        a.insert(VarId::new(0, 0), rat(3));
        assert_eq!(f.evaluate(&a).unwrap(), RatFunc::from_poly(y.add(&MPoly::int(3))));
    }

    #[test]
    fn denominator_is_monic() {
        let f = normalize(MPoly::one(), x().scale(&rat(-3))).unwrap();
        assert!(f.den().leading_coeff().is_one());
        assert_eq!(f.num(), &MPoly::constant(frac(-1, 3)));
    }
}
