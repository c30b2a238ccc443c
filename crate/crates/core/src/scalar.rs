//! Floating-point scalar abstraction.
//!
//! Every numeric routine in this crate is generic over [`Scalar`] so the same
//! code runs in `f32` or `f64`. The trait is a thin bundle of `num-traits`
//! bounds plus the conversions we need to pull constants out of configuration
//! (which is always parsed as `f64`).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type for model parameters, losses, and disparities.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant (tolerance, step size, ...) into `Self`.
    ///
    /// Panics only if the value is not representable at all, which cannot
    /// happen for the finite constants this crate uses.
    fn cast(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant must convert")
    }

    /// Lossy view of `self` as `f64`, used for reporting and serialization.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
