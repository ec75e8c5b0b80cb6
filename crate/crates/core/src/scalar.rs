use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar used by every algorithm in the crate.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite float converts to f64")
    }

    /// Tolerance used for unit-norm checks: 1e-9, or a few hundred ulps for
    /// types too coarse to reach it.
    #[inline]
    fn unit_tol() -> Self {
        Self::lit(1e-9).max(Self::epsilon() * Self::lit(1e3))
    }

    /// Relative level below which a residual is treated as exactly zero.
    #[inline]
    fn vanishing() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(100.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}
