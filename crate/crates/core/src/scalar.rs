//! Scalar abstraction shared by every numerical module.
//!
//! All matrix code is written against [`Real`], which is implemented for
//! `f32` and `f64`. Tolerances are specified in `f64` and widened to the
//! working precision of the scalar via [`Real::tol`].

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the covariance-matrix machinery.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + std::fmt::Display
{
    /// Machine epsilon of the type, as `f64`.
    const EPSILON_F64: f64;

    /// Lift an `f64` literal into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Tolerance `base`, but never tighter than a few hundred ulps of the type.
    #[inline]
    fn tol(base: f64) -> Self {
        Self::lit(base.max(256.0 * Self::EPSILON_F64))
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {
    const EPSILON_F64: f64 = f32::EPSILON as f64;
}

impl Real for f64 {
    const EPSILON_F64: f64 = f64::EPSILON;
}

/// Shorthand for [`Real::lit`].
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

#[inline]
pub(crate) fn half<T: Real>() -> T {
    T::lit(0.5)
}

/// `x` rounded to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 || digits == 0 {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_floor_depends_on_precision() {
        assert_eq!(<f64 as Real>::tol(1e-12), 1e-12);
        assert!(<f32 as Real>::tol(1e-12) > 1e-6);
    }

    #[test]
    fn significant_digit_rounding() {
        assert_eq!(round_significant(0.1 + 0.2, 12), 0.3);
        assert_eq!(round_significant(-1.336306209562122, 12), -1.33630620956);
        assert_eq!(round_significant(0.0, 12), 0.0);
        assert_eq!(round_significant(123456.7, 3), 123000.0);
    }
}
