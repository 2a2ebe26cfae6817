//! Floating-point scalar abstraction for the numeric kernels.
//!
//! Everything that is pure arithmetic — IoU, reward formulas, advantage
//! normalization, cosine similarity, average precision — is written against
//! [`Scalar`] so the same code runs in `f32` or `f64`. The crate root fixes
//! `f64` aliases for the wire-facing layers.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + AddAssign + Sum + Debug + Send + Sync + 'static
{
    /// Lift an `f64` constant into this scalar type.
    ///
    /// Panics if the constant is not representable, which cannot happen for
    /// the finite literals used by this crate.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite literal representable in scalar type")
    }

    /// Lift a count into this scalar type.
    fn from_count(value: usize) -> Self {
        Self::from_usize(value).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
