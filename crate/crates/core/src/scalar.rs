use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Real floating-point scalar the toolkit computes in: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal or tolerance.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
