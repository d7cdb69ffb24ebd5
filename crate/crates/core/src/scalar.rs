//! Scalar abstractions.
//!
//! [`Real`] is the floating-point type a computation runs in (`f32` or
//! `f64`). [`Scalar`] is anything a Lagrangian can be evaluated over: a real
//! number, or a [`TaylorJet`](crate::jet::TaylorJet) carrying derivatives.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type underlying every computation.
///
/// Because `Real` implies both [`Float`] and [`Scalar`], calls such as
/// `x.sqrt()` on a generic `T: Real` are ambiguous; use `Float::sqrt(x)`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Scalar<Real = Self>
{
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field-like value a Lagrangian expression can be evaluated over.
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
    type Real: Real;

    fn constant(v: Self::Real) -> Self;

    /// Value part (the real number itself, or the jet's constant term).
    fn real(&self) -> Self::Real;

    /// True if the value carries no derivative information.
    fn is_constant(&self) -> bool;

    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, k: i32) -> Self;
    fn powf(&self, p: Self::Real) -> Self;

    /// Constant from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::constant(<Self::Real as FromPrimitive>::from_f64(v).expect("f64 literal representable"))
    }

    fn scale(&self, k: Self::Real) -> Self {
        self.clone() * Self::constant(k)
    }
}

macro_rules! impl_scalar_float {
    ($t:ty) => {
        impl Scalar for $t {
            type Real = $t;

            #[inline]
            fn constant(v: $t) -> Self {
                v
            }
            #[inline]
            fn real(&self) -> $t {
                *self
            }
            #[inline]
            fn is_constant(&self) -> bool {
                true
            }
            #[inline]
            fn exp(&self) -> Self {
                <$t>::exp(*self)
            }
            #[inline]
            fn ln(&self) -> Self {
                <$t>::ln(*self)
            }
            #[inline]
            fn sin(&self) -> Self {
                <$t>::sin(*self)
            }
            #[inline]
            fn cos(&self) -> Self {
                <$t>::cos(*self)
            }
            #[inline]
            fn sqrt(&self) -> Self {
                <$t>::sqrt(*self)
            }
            #[inline]
            fn powi(&self, k: i32) -> Self {
                <$t>::powi(*self, k)
            }
            #[inline]
            fn powf(&self, p: $t) -> Self {
                <$t>::powf(*self, p)
            }
        }
    };
}

impl_scalar_float!(f32);
impl_scalar_float!(f64);
