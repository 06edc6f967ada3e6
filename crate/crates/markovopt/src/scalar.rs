//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over a floating-point
//! [`Scalar`]; `f64` is what the CLI and the type aliases at the crate root
//! use, `f32` is available for callers that want it.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar the numeric core is generic over.
pub trait Scalar:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into the scalar type.
    fn of(v: f64) -> Self;

    /// `f64` view of the value, for error reporting and formatting.
    fn as_f64(self) -> f64;

    /// Draws from the standard normal distribution.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draws uniformly from `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn of(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }

            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.gen::<$t>()
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);
