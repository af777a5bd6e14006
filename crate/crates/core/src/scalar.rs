//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Networks, losses and scores are written once against [`Scalar`] and
//! instantiated with `f32` for training, `f64` for gradient verification, and
//! [`Dual`](crate::dual::Dual) when a forward-mode derivative of a
//! backpropagated gradient is needed (the gradient-penalty term).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts a literal. Panics only if the target cannot represent a finite f64,
    /// which no implementor in this crate does.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("scalar literal out of range")
    }

    /// Lossy projection onto f64 (the real part for dual numbers).
    fn real(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn real(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn real(self) -> f64 {
        self
    }
}
