//! Odd continued fractions parametrised by α ∈ [g, G]: digit expansions,
//! the planar natural extension, invariant measures and cylinder geometry.

pub mod alpha;
pub mod cylinders;
pub mod digits;
pub mod error;
pub mod interval;
pub mod measures;
pub mod natext;
pub mod quad;
pub mod sampling;
pub mod verify;

pub use alpha::{AlphaParam, Branch, Constants};
pub use error::{CfError, Result};
