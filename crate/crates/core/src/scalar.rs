use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the solver is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances that depend on the precision
/// of the type (row-sum checks, default bisection widths) live here so the
/// numerical kernels never hard-code an `f64` epsilon.
pub trait Scalar:
    'static
    + Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
{
    /// Allowed deviation of a probability row sum from one.
    fn stochastic_tol() -> Self;

    /// Default absolute width at which bisection stops.
    fn default_inner_tol() -> Self;

    /// Convert an `f64` literal into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    #[inline]
    fn stochastic_tol() -> Self {
        1e-12
    }

    #[inline]
    fn default_inner_tol() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    #[inline]
    fn stochastic_tol() -> Self {
        1e-5
    }

    #[inline]
    fn default_inner_tol() -> Self {
        1e-5
    }
}
