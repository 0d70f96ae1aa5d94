//! Floating point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type used throughout the crate: `f32` or `f64`.
///
/// Oracle and gradient-check runs use `f64`; `f32` is available for larger
/// training runs where memory dominates.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Name written into persisted files.
    const NAME: &'static str;

    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

/// Logistic function.
#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `ln σ(z) = -softplus(-z)`.
#[inline]
pub fn log_sigmoid<T: Scalar>(z: T) -> T {
    -softplus(-z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_saturates() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!((sigmoid(3.0f64) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
        assert_eq!(sigmoid(800.0f64), 1.0);
        assert_eq!(sigmoid(-800.0f64), 0.0);
        assert!(sigmoid(-30.0f32) > 0.0);
    }

    #[test]
    fn log_sigmoid_is_overflow_safe() {
        assert!((log_sigmoid(0.0f64) + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_sigmoid(1e4f64), 0.0);
        assert!((log_sigmoid(-1e4f64) + 1e4).abs() < 1e-9);
        for z in [-20.0f64, -1.5, 0.3, 7.0] {
            let direct = (1.0 / (1.0 + (-z).exp())).ln();
            assert!((log_sigmoid(z) - direct).abs() < 1e-13);
        }
    }
}
