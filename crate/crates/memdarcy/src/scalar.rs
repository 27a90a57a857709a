//! Scalar abstraction shared by every solver in the crate.

use core::fmt::{Debug, Display};
use core::iter::Sum;
use num_traits as nt;

/// Floating point type the solvers are generic over (`f32` or `f64`).
pub trait Real:
    nt::Float
    + nt::FloatConst
    + nt::FromPrimitive
    + nt::NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and configuration values.
    #[inline]
    fn c(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion of a count or index.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::c(n as f64)
    }

    /// Widening conversion for reporting.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
