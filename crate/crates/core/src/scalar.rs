//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Floor that snaps values within a few ulps below an integer up to that
/// integer, so `ln(1e4)/ln(10)` floors to 4 rather than 3.
pub fn robust_floor<T: Real>(x: T) -> T {
    let r = x.round();
    let tol = T::lit(1e-12) * T::one().max(x.abs());
    if (x - r).abs() <= tol {
        r
    } else {
        x.floor()
    }
}

/// Ceiling with the same integer snapping as [`robust_floor`].
pub fn robust_ceil<T: Real>(x: T) -> T {
    let r = x.round();
    let tol = T::lit(1e-12) * T::one().max(x.abs());
    if (x - r).abs() <= tol {
        r
    } else {
        x.ceil()
    }
}

/// `ε ln(ε⁻¹ + 2)`, the defect scale of oscillating problems; zero at ε = 0.
pub fn epsilon_scale<T: Real>(eps: T) -> T {
    if eps <= T::zero() {
        T::zero()
    } else {
        eps * (eps.recip() + T::lit(2.0)).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping_floor() {
        let x = (1e4f64).ln() / 10f64.ln();
        assert_eq!(robust_floor(x), 4.0);
        assert_eq!(robust_floor(3.7f64), 3.0);
        assert_eq!(robust_ceil(3.0000000000001f64), 3.0);
        assert_eq!(robust_ceil(3.2f64), 4.0);
    }

    #[test]
    fn eps_scale() {
        assert_eq!(epsilon_scale(0.0f64), 0.0);
        let v = epsilon_scale(1e-3f64);
        assert!((v - 6.909_7e-3).abs() < 1e-6);
    }
}
