//! Differentiable tensor operations.
//!
//! Every op validates shapes, rejects non-finite outputs, and records a
//! backward entry when any input is tracked. Broadcasting is restricted
//! to leading batch dimensions (matmul, softmax bias); everything else
//! requires exact shapes or a dedicated bias op.

mod conv;
mod elementwise;
mod linalg;
mod norm;
mod reduce;
mod shape_ops;
mod softmax;

pub use conv::{conv2d, upsample_nearest2x};
pub use elementwise::{
    add, add_bias, add_channel_bias, add_scalar, mul, neg, relu, scale, silu, sub,
};
pub use linalg::{matmul, matmul_nt, matmul_tn, permute, transpose2d};
pub use norm::{group_norm, layer_norm};
pub use reduce::{mean_all, sum_all};
pub use shape_ops::{concat, reshape, slice_axis};
pub use softmax::softmax_rows;

use super::error::{DiffError, Result};
use super::scalar::Scalar;
use super::tape::{GradBuffers, Tape};
use super::tensor::Tensor;

/// The single tape shared by the tracked inputs, if any.
fn resolve_tape<T: Scalar>(op: &'static str, inputs: &[&Tensor<T>]) -> Result<Option<Tape<T>>> {
    let mut found: Option<Tape<T>> = None;
    for t in inputs {
        if let Some(node) = t.node() {
            match &found {
                None => found = Some(node.tape.clone()),
                Some(tape) if tape.same_tape(&node.tape) => {}
                Some(_) => return Err(DiffError::TapeMismatch { op }),
            }
        }
    }
    Ok(found)
}

/// Finish an op: finite-check the result, and if any input is tracked,
/// register the output and its backward entry on the shared tape.
pub(crate) fn record<T: Scalar>(
    op: &'static str,
    shape: Vec<usize>,
    data: Vec<T>,
    inputs: &[&Tensor<T>],
    backward: impl Fn(&[T], &mut GradBuffers<T>) + Send + 'static,
) -> Result<Tensor<T>> {
    if !data.iter().all(|v| v.is_finite()) {
        return Err(DiffError::NonFinite { op });
    }
    let node = match resolve_tape(op, inputs)? {
        None => None,
        Some(tape) => {
            let id = tape.register_value(shape.clone());
            tape.push_entry(id, backward);
            Some(super::tensor::Node { id, tape })
        }
    };
    Ok(Tensor::with_node(shape, data, node))
}

fn same_shape<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(DiffError::ShapeMismatch {
            op,
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    Ok(())
}
