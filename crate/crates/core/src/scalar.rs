//! Floating-point abstraction shared by every physics module.
//!
//! All models are written against [`Scalar`] so the same code runs in `f64`
//! (the default everywhere in the CLI) or `f32` (handy for memory-bound batch
//! sweeps). Anything implementing `num_traits::Float` plus serde qualifies.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only for types that cannot hold a
    /// finite `f64`, which no supported float does.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        self.max(lo).min(hi)
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Sum
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}

pub const ZERO_CELSIUS_K: f64 = 273.15;
pub const GRAVITY: f64 = 9.80665;

#[inline]
pub fn kelvin_to_celsius<T: Scalar>(k: T) -> T {
    k - T::lit(ZERO_CELSIUS_K)
}

#[inline]
pub fn celsius_to_kelvin<T: Scalar>(c: T) -> T {
    c + T::lit(ZERO_CELSIUS_K)
}

#[inline]
pub fn rpm_to_rad_s<T: Scalar>(rpm: T) -> T {
    rpm * T::PI() / T::lit(30.0)
}

#[inline]
pub fn rad_s_to_rpm<T: Scalar>(w: T) -> T {
    w * T::lit(30.0) / T::PI()
}

#[inline]
pub fn kmh_to_ms<T: Scalar>(kmh: T) -> T {
    kmh / T::lit(3.6)
}

#[inline]
pub fn ms_to_kmh<T: Scalar>(ms: T) -> T {
    ms * T::lit(3.6)
}
