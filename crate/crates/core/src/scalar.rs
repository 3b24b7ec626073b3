//! Floating-point abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the solvers are generic over.
///
/// Implemented for `f32` and `f64`. The tolerances used throughout the
/// experiments (down to `1e-13`) only make sense in `f64`; `f32` is kept for
/// quick prototyping and for exercising the generic code paths.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal is representable")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
