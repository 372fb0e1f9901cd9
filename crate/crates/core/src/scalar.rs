//! Numeric domain abstraction: exact rationals or `f64`.

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_traits::{NumAssignRef, NumRef, Signed, Zero};

use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn name(self) -> &'static str {
        match self {
            Sign::Negative => "negative",
            Sign::Zero => "zero",
            Sign::Positive => "positive",
        }
    }

    pub fn of_ordering(o: std::cmp::Ordering) -> Sign {
        match o {
            std::cmp::Ordering::Less => Sign::Negative,
            std::cmp::Ordering::Equal => Sign::Zero,
            std::cmp::Ordering::Greater => Sign::Positive,
        }
    }
}

pub trait Scalar:
    Clone + Debug + Display + PartialOrd + NumRef + NumAssignRef + Neg<Output = Self> + Send + Sync + 'static
{
    /// Exact types use policy iteration; inexact ones value iteration.
    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    /// Exact rational view (floats convert their binary value).
    fn to_rational(&self) -> Rational;
    fn abs_value(&self) -> Self;

    /// Sign; inexact values within `tol` of zero count as zero.
    fn sign(&self, tol: f64) -> Sign;
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        rational::to_f64(self)
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }

    fn sign(&self, _tol: f64) -> Sign {
        if self.is_zero() {
            Sign::Zero
        } else if self.is_positive() {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        rational::to_f64(r)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Rational {
        rational::from_f64(*self)
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }

    fn sign(&self, tol: f64) -> Sign {
        if self.abs() <= tol {
            Sign::Zero
        } else if *self > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}
