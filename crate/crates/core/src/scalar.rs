//! Scalar abstraction for delay arithmetic.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real-valued scalar used for every delay quantity (milliseconds).
///
/// Implemented for `f32` and `f64`; the simulator itself defaults to `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the value is not representable,
    /// which cannot happen for finite inputs on `f32`/`f64`.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite literal representable in scalar type")
    }

    fn from_count(count: u64) -> Self {
        Self::from_u64(count).expect("integer representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Rounds to the fixed 4-decimal resolution used by trace output.
    fn round_4dp(self) -> Self {
        let scale = Self::lit(1.0e4);
        (self * scale).round() / scale
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}
