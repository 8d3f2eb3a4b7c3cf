//! Scalar abstraction for the geometry layers.
//!
//! Mesh and scene math is generic over [`Real`] so the same code runs in
//! f32 or f64. Serialized records always carry 64-bit floats on the wire;
//! `to_wire`/`from_wire` are the (lossless for f32) bridge.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Widen to the 64-bit wire representation.
    fn to_wire(self) -> f64;
    /// Narrow from the wire representation.
    fn from_wire(v: f64) -> Self;
}

impl Real for f32 {
    fn to_wire(self) -> f64 {
        self as f64
    }
    fn from_wire(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    fn to_wire(self) -> f64 {
        self
    }
    fn from_wire(v: f64) -> Self {
        v
    }
}
