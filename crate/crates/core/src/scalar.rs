//! Scalar abstraction shared by the geometric and spectral layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the geometry, coding and transfer layers are written over.
///
/// Implemented for `f32` and `f64`. Tolerances in this crate are stated for
/// `f64`; `f32` instantiations compile and run but only meet looser bounds.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex numbers over a [`Real`].
pub type Cx<T> = num_complex::Complex<T>;

pub(crate) fn cx<T: Real>(re: T, im: T) -> Cx<T> {
    Cx::new(re, im)
}

pub(crate) fn real<T: Real>(re: T) -> Cx<T> {
    Cx::new(re, T::zero())
}
