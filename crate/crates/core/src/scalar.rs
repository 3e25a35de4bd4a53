//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type the library computes in.
///
/// Implemented for `f32` and `f64`. Everything numeric (log-ratios, ratios,
/// moments, model fitting) is written against this trait; the crate root
/// exports `f64` aliases for the common case.
pub trait Real:
    'static
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Maps non-finite values onto the largest finite magnitudes:
    /// `+inf` and `NaN` become `MAX`, `-inf` becomes `-MAX`.
    #[inline]
    fn sentinel(self) -> Self {
        if self.is_finite() {
            self
        } else if self == Self::neg_infinity() {
            -Self::max_value()
        } else {
            Self::max_value()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean distance between two equal-length slices.
pub fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    squared_euclidean(a, b).sqrt()
}

pub fn squared_euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}
