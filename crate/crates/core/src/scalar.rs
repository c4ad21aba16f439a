//! Scalar abstraction for the numeric core.
//!
//! All tensor math is generic over [`Scalar`] so the same kernels run at
//! f32 or f64. The pipeline instantiates everything at f64 (see the
//! crate-root aliases); f32 stays available for experiments.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign, NumCast};

/// Floating-point element type accepted by tensors and the autograd tape.
pub trait Scalar:
    Float + NumAssign + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from f64, for literals and tolerances.
    fn from_f64(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("finite f64 constant must convert")
    }

    /// Widening conversion to f64, for persistence and reporting.
    fn as_f64(self) -> f64 {
        num_traits::cast::<Self, f64>(self).expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
