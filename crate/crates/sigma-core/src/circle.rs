//! Rational points of the circle group, written additively as angles in Q/Z.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use serde::{Serialize, Serializer};

use crate::rat::{fmt_rat, Rat};

/// Angle reduced into `[0, 1)`; the group law is addition mod 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CircleValue(Rat);

impl CircleValue {
    pub fn new(angle: Rat) -> Self {
        let fl = angle.numer().div_floor(angle.denom());
        CircleValue(angle - Rat::from_integer(fl))
    }

    pub fn zero() -> Self {
        CircleValue(Rat::zero())
    }

    pub fn angle(&self) -> &Rat {
        &self.0
    }

    pub fn add(&self, other: &CircleValue) -> CircleValue {
        CircleValue::new(&self.0 + &other.0)
    }

    pub fn neg(&self) -> CircleValue {
        CircleValue::new(-self.0.clone())
    }

    pub fn times(&self, z: &BigInt) -> CircleValue {
        CircleValue::new(&self.0 * Rat::from_integer(z.clone()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Order in the circle group: the reduced denominator of the angle.
    pub fn order(&self) -> BigInt {
        self.0.denom().clone()
    }
}

impl fmt::Display for CircleValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_rat(&self.0))
    }
}

impl Serialize for CircleValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(&self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::frac;

    #[test]
    fn reduces_mod_one() {
        assert_eq!(CircleValue::new(frac(7, 3)), CircleValue::new(frac(1, 3)));
        assert_eq!(CircleValue::new(frac(-1, 4)).angle(), &frac(3, 4));
        assert!(CircleValue::new(frac(2, 1)).is_zero());
    }

    #[test]
    fn group_law() {
        let a = CircleValue::new(frac(1, 3));
        let b = CircleValue::new(frac(1, 4));
        assert_eq!(a.add(&b).angle(), &frac(7, 12));
        assert!(a.add(&a.neg()).is_zero());
        assert_eq!(a.order(), BigInt::from(3));
        assert!(a.times(&BigInt::from(3)).is_zero());
    }
}
