use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar accepted by the solvers and models.
///
/// Implemented for `f32` and `f64`. Solver tolerances scale with the type:
/// double precision targets the residual bounds used throughout the test
/// suite, single precision gets a bound a few orders above its epsilon.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync
{
    /// Relative residual accepted from the Riccati and Lyapunov solvers.
    fn residual_tol() -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn residual_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn residual_tol() -> Self {
        5e-3
    }
}
