//! Scalar abstraction for the whole crate.
//!
//! Every algorithm here is generic over a real floating-point type; `f32` and
//! `f64` both qualify through a blanket impl. The crate root exports
//! f64-concrete aliases for the common types, which is what the CLI and the
//! reference tolerances are written against.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type usable for all numerics in this crate.
///
/// `RealField` supplies elementary functions and the dense factorizations,
/// the num-traits bounds the conversions to and from literals and counts.
/// `LowerExp` is needed to serialize traces with full precision.
pub trait Scalar:
    RealField + FromPrimitive + ToPrimitive + Copy + Default + std::fmt::LowerExp
{
}

impl<T> Scalar for T where
    T: RealField + FromPrimitive + ToPrimitive + Copy + Default + std::fmt::LowerExp
{
}

/// Converts an `f64` constant into the working scalar type.
///
/// All tolerances and literals in this crate go through this; for `f64` it is
/// the identity.
#[inline]
pub fn conv<T: Scalar>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Converts a scalar back to `f64` (for reporting; NaN when not representable).
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}
