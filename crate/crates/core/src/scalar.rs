//! Floating point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used throughout the library: `f32` or `f64`.
///
/// Tolerances that depend on the working precision live here so that the
/// solvers can be written once and still stop sensibly in single precision.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance on the sum of scenario weights.
    const WEIGHT_TOLERANCE: f64;
    /// Smallest relative bracket width a bisection can meaningfully reach.
    const BRACKET_FLOOR: f64;

    /// Converts an `f64` literal; panics only for non-representable input,
    /// which cannot happen for the finite constants used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const WEIGHT_TOLERANCE: f64 = 1e-12;
    const BRACKET_FLOOR: f64 = 4.0 * f64::EPSILON;
}

impl Scalar for f32 {
    const WEIGHT_TOLERANCE: f64 = 1e-5;
    const BRACKET_FLOOR: f64 = 4.0 * f32::EPSILON as f64;
}

/// Lexicographic comparison for finite values (NaN sorts as equal).
#[inline]
pub(crate) fn cmp<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
}
