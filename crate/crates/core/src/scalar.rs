//! Scalar abstraction for the numeric code.
//!
//! Everything numeric in this crate is generic over [`Float`], implemented
//! for `f32` and `f64`. The crate root exposes `f64` aliases for the common
//! types; the harness and CLI are pinned to `f64`.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar type: `f32` or `f64`.
pub trait Float:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant must be representable in the scalar type")
    }
}

impl Float for f32 {}
impl Float for f64 {}
