//! Minimal dense-matrix numerics: matrices, layer primitives with manual
//! backward passes, Adam, and seeded random streams.

pub mod adam;
pub mod matrix;
pub mod ops;
pub mod rng;

pub use adam::{adam_step, AdamState};
pub use matrix::{matmul, Matrix};
pub use rng::RngStream;
