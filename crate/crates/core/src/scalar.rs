//! Scalar abstraction shared by the exact population engine and the sample metrics.
//!
//! Population measures only need field arithmetic, absolute values and an
//! ordering, so they run unchanged on `f64`, `f32` and exact rationals.
//! Anything that takes a p-th root or an exponential additionally needs
//! [`Real`].

use std::fmt::Debug;

use num_rational::{BigRational, Ratio};
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Num + Signed + FromPrimitive + ToPrimitive + PartialOrd + Clone + Debug + Send + Sync + 'static
{
    /// Converts a literal. Panics only for values the type cannot represent
    /// (non-finite input for rationals).
    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(|| panic!("{v} is not representable"))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    /// Raises `self` to a positive integer power.
    fn powu(&self, p: u32) -> Self {
        num_traits::pow(self.clone(), p as usize)
    }

    /// `false` for NaN and infinities; rationals are always finite.
    fn is_finite_value(&self) -> bool {
        true
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for BigRational {}
impl Scalar for Ratio<i64> {}
impl Scalar for Ratio<i128> {}

/// Floating-point scalars: adds roots, exponentials and the like.
pub trait Real: Scalar + Float {
    /// p-th root of a nonnegative value.
    fn root(self, p: u32) -> Self {
        if p == 1 {
            self
        } else {
            self.powf(Self::one() / Self::from_u32(p).unwrap())
        }
    }
}

impl Real for f64 {}
impl Real for f32 {}
