//! Scalar abstraction the numeric kernels are generic over.

use std::fmt::{Debug, Display};

/// Floating-point scalar for the geometry, fitting, and smoothing kernels.
///
/// Blanket-implemented for `f32` and `f64`. The crate-root aliases fix `f64`,
/// which is what the pipeline and all file formats use; `f32` stays available
/// for raster-heavy callers that can live with the precision.
pub trait Real:
    num_traits::Float
    + num_traits::float::FloatConst
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` constant; panics only on values no float can hold.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    /// Widening (or for `f64`, identity) view for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::float::FloatConst
        + num_traits::FromPrimitive
        + num_traits::NumAssign
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn of_round_trips_through_both_widths() {
        assert_eq!(f64::of(0.25), 0.25);
        assert_eq!(f32::of(0.25), 0.25f32);
        assert_eq!(0.25f32.as_f64(), 0.25);
    }
}
