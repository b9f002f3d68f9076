//! Scalar abstraction shared by the geometry, simulation, representation and
//! metrics code. Everything numeric is written once against [`Scalar`] and
//! instantiated for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Number of significand bits, including the implicit leading one.
    const MANTISSA_DIGITS: u32;

    /// Lossy conversion from an `f64` literal or intermediate.
    fn of(v: f64) -> Self;

    /// Widening conversion used at I/O boundaries.
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const MANTISSA_DIGITS: u32 = f32::MANTISSA_DIGITS;

    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const MANTISSA_DIGITS: u32 = f64::MANTISSA_DIGITS;

    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Round to the nearest integer, ties away from zero, saturating at the `u64` range.
#[inline]
pub fn round_to_u64<T: Scalar>(v: T) -> u64 {
    let r = v.round();
    if r <= T::zero() {
        0
    } else {
        r.to_u64().unwrap_or(u64::MAX)
    }
}
