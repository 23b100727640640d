//! Scalar abstraction for the numeric core.
//!
//! Every training and weighting routine is generic over [`Scalar`] so the
//! same code runs in `f32` or `f64`. Randomness is always drawn in `f64`
//! and converted, which keeps sample streams structurally identical across
//! scalar types.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Convert from `f64`, rounding to the nearest representable value.
    fn cast(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to any float scalar")
    }

    /// Convert to `f64` (exact for `f32`, identity for `f64`).
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("float scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip_for_representable_values() {
        assert_eq!(<f32 as Scalar>::cast(0.5), 0.5f32);
        assert_eq!(<f64 as Scalar>::cast(0.5), 0.5f64);
        assert_eq!(0.25f32.to_f64_lossy(), 0.25f64);
    }
}
