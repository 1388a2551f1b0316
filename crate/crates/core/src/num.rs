//! Scalar abstraction for the analysis-layer math.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the fairness decisions and the two-source model are
/// generic over. Implemented by `f32` and `f64`; the simulator itself runs on
/// [`crate::Scalar`].
pub trait Real: Float + FromPrimitive + Debug + Display + Copy {
    /// Conversion for constants and tolerances known to fit the scalar type.
    fn cast(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in scalar type")
    }

    /// A small count (VC totals, pass counters) as a scalar.
    fn from_count(n: u32) -> Self {
        Self::from_u32(n).expect("count representable in scalar type")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + Debug + Display + Copy {}
