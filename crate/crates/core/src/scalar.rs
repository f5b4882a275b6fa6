//! Scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the algorithms are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Allowed deviation of a row sum from 1 before a composition is rejected.
    const SUM_TOLERANCE: Self;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f64 {
    const SUM_TOLERANCE: f64 = 1e-9;
}

impl Scalar for f32 {
    const SUM_TOLERANCE: f32 = 1e-5;
}
