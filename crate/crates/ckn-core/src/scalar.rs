//! Floating scalar abstraction.
//!
//! Everything numeric in this crate is written against [`Real`] so the same
//! code instantiates at `f32` and `f64`. Constants that appear in formulas
//! are converted through [`Real::of`]; they are all exactly representable or
//! within one ulp at `f64`, which is the precision the published tolerances
//! assume.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive};

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` constant into the scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant not representable in scalar type")
    }

    /// Convert a count into the scalar type.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize not representable in scalar type")
    }

    /// Convert a signed integer into the scalar type.
    #[inline]
    fn of_i32(n: i32) -> Self {
        Self::from_i32(n).expect("i32 not representable in scalar type")
    }

    #[inline]
    fn half() -> Self {
        Self::of(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::of(2.0)
    }

    /// `ln(1 + x)` is needed for the overflow-safe `ln cosh`.
    #[inline]
    fn ln1p(self) -> Self {
        Self::ln_1p(self)
    }

    /// Overflow-safe `ln cosh x`, valid for `|x|` up to the `exp` range.
    #[inline]
    fn ln_cosh(self) -> Self {
        let a = self.abs();
        a + ((-Self::two() * a).exp()).ln1p() - Self::LN_2()
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum
        + Debug
        + Display
        + LowerExp
        + Send
        + Sync
        + 'static
{
}
