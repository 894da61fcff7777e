//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the toolkit is generic over: `f32` or `f64`.
///
/// Tolerances in the public contracts (1e-9 rad round trips, 1e-12 involutions,
/// finite-difference gradient checks) assume `f64`; `f32` is supported for
/// storage-bound workloads and loses those guarantees accordingly.
pub trait Real: Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Threshold below which an angle or vector norm is treated as zero for
    /// series expansions. Scaled to the type's precision.
    #[inline]
    fn small_angle() -> Self {
        Self::epsilon().sqrt().sqrt()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier-compensated summation. Used wherever a mean over many frames must
/// be reproducible to ~1e-12 independent of how the terms were produced.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), carry: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Real> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn stable_sum<T: Real>(iter: impl IntoIterator<Item = T>) -> T {
    iter.into_iter().collect::<CompensatedSum<T>>().value()
}
