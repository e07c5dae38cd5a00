//! Scalar abstraction for the numeric subsystem.
//!
//! Encoder vectors, model weights, and ranking metrics are generic over
//! [`Scalar`] so the same code runs in `f32` or `f64`. The pipeline defaults
//! to `f64` (see the type aliases at the crate root); `f32` is available for
//! memory-constrained use.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar usable throughout the encoder, model, and metrics.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Tag recorded in checkpoints so a reload cannot silently change width.
    const TAG: &'static str;

    /// Lossless-enough conversion from `f64` literals and config values.
    fn from_f64_lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Scalar")
    }
}

impl Scalar for f32 {
    const TAG: &'static str = "f32";
}

impl Scalar for f64 {
    const TAG: &'static str = "f64";
}
