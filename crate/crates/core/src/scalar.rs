use std::str::FromStr;

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Real scalar the numerical code is generic over: `f32` or `f64`.
///
/// `RealField` supplies the arithmetic and elementary functions (and, through
/// `ComplexField`, `num_traits::FromPrimitive`); `ToPrimitive` and `FromStr`
/// cover reporting and dataset parsing.
pub trait Scalar: RealField + Copy + ToPrimitive + FromStr {
    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn of(v: f64) -> Self;

    /// Machine epsilon of the type.
    fn eps() -> Self;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn of_usize(v: usize) -> Self {
        Self::of(v as f64)
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn eps() -> Self {
        f32::EPSILON
    }
}
