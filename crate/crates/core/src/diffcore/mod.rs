//! Minimal reverse-mode differentiable tensor engine.
//!
//! Supplies the dense tensor type, the recording tape, the operation set
//! used by the transformer and UNet, the AdamW optimizer, checkpoint
//! serialization, and built-in finite-difference gradient verification.

pub mod checkpoint;
mod error;
pub mod gradcheck;
pub mod ops;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use error::{DiffError, Result};
pub use params::{AdamWParams, BoundParams, ParamStore};
pub use scalar::{sc, Dtype, Scalar};
pub use tape::{backward, GradBuffers, Gradients, Tape, ValId};
pub use tensor::{numel, Tensor};

/// Training-precision tensor.
pub type Tensor32 = Tensor<f32>;
/// Verification-precision tensor.
pub type Tensor64 = Tensor<f64>;

#[cfg(test)]
mod tests;
