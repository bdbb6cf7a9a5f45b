//! Real scalar abstraction used by every numerical routine in the crate.
//!
//! The solvers, channel builders and rate evaluators are written once against
//! [`Real`] and instantiated at `f32` or `f64`. Tolerances quoted throughout
//! the crate assume `f64`; `f32` instantiations are for scale experiments, not
//! for the acceptance thresholds.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar with the conversions and constants the crate needs.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and configuration values.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Lossy conversion to `f64`, used for reporting.
    fn to64(self) -> f64 {
        self.to_f64().expect("finite value")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for `Real::of`, keeping numeric literals readable in generic code.
#[inline]
pub fn r<T: Real>(x: f64) -> T {
    T::of(x)
}

/// Complex unit with zero imaginary part.
#[inline]
pub fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

/// Complex zero.
#[inline]
pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `exp(i phi)` for a real phase.
#[inline]
pub fn cis<T: Real>(phi: T) -> Complex<T> {
    Complex::new(phi.cos(), phi.sin())
}

/// Speed of light in vacuum, m/s.
pub fn speed_of_light<T: Real>() -> T {
    r(299_792_458.0)
}

/// Converts a dBm level to watts.
pub fn dbm_to_watts<T: Real>(dbm: T) -> T {
    r::<T>(1e-3) * r::<T>(10.0).powf(dbm / r(10.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_conversions_match_reference_points() {
        assert!((dbm_to_watts(30.0_f64) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(0.0_f64) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watts(-60.0_f64) - 1e-9).abs() < 1e-24);
        assert!((dbm_to_watts(10.0_f64) - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn cis_is_unit_modulus() {
        for k in 0..100 {
            let phi = 0.0628 * k as f64;
            assert!((cis(phi).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn generic_literals_round_trip() {
        let x: f32 = r(0.25);
        assert_eq!(x, 0.25f32);
        let y: f64 = r(1e-9);
        assert_eq!(y, 1e-9);
    }
}
