//! Numeric traits shared by the exact and floating-point code paths.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, FromPrimitive, One, ToPrimitive, Zero};

/// Floating-point scalar used on grids and in pointwise kernels.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 conversion")
    }
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Coefficient ring for polynomials.
///
/// `f64` is exact as long as every coefficient stays an integer below 2^53,
/// which is how the certification families are built.
pub trait Coeff:
    Clone
    + PartialEq
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Coeff for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coeff for f32 {
    fn from_i64(v: i64) -> Self {
        v as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Coeff for i64 {
    fn from_i64(v: i64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Coeff for BigRational {
    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Coeff for Ratio<i64> {
    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(v)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Anything an analytic formula can be evaluated in: plain floats, or
/// truncated Taylor jets that carry all derivatives up to a fixed order.
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    type Base: Real;

    fn cst(v: Self::Base) -> Self;
    fn primal(&self) -> Self::Base;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn recip(&self) -> Self;
    fn scale(&self, k: Self::Base) -> Self;

    fn from_f64(v: f64) -> Self {
        Self::cst(Self::Base::of(v))
    }
    fn zero() -> Self {
        Self::cst(Self::Base::zero())
    }
    fn one() -> Self {
        Self::cst(Self::Base::one())
    }
    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

macro_rules! real_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            type Base = $t;
            fn cst(v: $t) -> Self {
                v
            }
            fn primal(&self) -> $t {
                *self
            }
            fn sqrt(&self) -> Self {
                Float::sqrt(*self)
            }
            fn exp(&self) -> Self {
                Float::exp(*self)
            }
            fn powf(&self, p: f64) -> Self {
                Float::powf(*self, p as $t)
            }
            fn recip(&self) -> Self {
                Float::recip(*self)
            }
            fn scale(&self, k: $t) -> Self {
                *self * k
            }
        }
    };
}

real_scalar!(f32);
real_scalar!(f64);
