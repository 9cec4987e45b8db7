//! Dense n-dimensional tensors with optional tape tracking.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::error::{DiffError, Result};
use super::scalar::Scalar;
use super::tape::{Tape, ValId};

/// Dense row-major tensor. Cloning is cheap (shared storage).
///
/// A tensor is either a plain value or tracked on a [`Tape`]; tracked
/// tensors participate in reverse-mode differentiation. All operations
/// reject non-finite results instead of propagating them.
#[derive(Clone)]
pub struct Tensor<T: Scalar> {
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
    node: Option<Node<T>>,
}

#[derive(Clone)]
pub(crate) struct Node<T: Scalar> {
    pub id: ValId,
    pub tape: Tape<T>,
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> Tensor<T> {
    /// Build a tensor from raw data. Errors if the length does not match
    /// the shape or any value is non-finite.
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Tensor<T>> {
        if numel(&shape) != data.len() {
            return Err(DiffError::ShapeMismatch {
                op: "from_vec",
                detail: format!("shape {:?} needs {} values, got {}", shape, numel(&shape), data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(DiffError::NonFinite { op: "from_vec" });
        }
        Ok(Tensor { shape, data: Arc::new(data), node: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor<T> {
        let n = numel(&shape);
        Tensor { shape, data: Arc::new(vec![T::zero(); n]), node: None }
    }

    pub fn full(shape: Vec<usize>, value: T) -> Result<Tensor<T>> {
        let n = numel(&shape);
        Tensor::from_vec(shape, vec![value; n])
    }

    pub fn scalar(value: T) -> Result<Tensor<T>> {
        Tensor::from_vec(vec![], vec![value])
    }

    /// Standard-normal samples from the given RNG.
    pub fn randn<R: Rng>(shape: Vec<usize>, rng: &mut R) -> Tensor<T> {
        let n = numel(&shape);
        let data: Vec<T> = (0..n)
            .map(|_| T::from_f64(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        Tensor { shape, data: Arc::new(data), node: None }
    }

    /// Uniform samples in `[lo, hi)`.
    pub fn rand_uniform<R: Rng>(shape: Vec<usize>, lo: f64, hi: f64, rng: &mut R) -> Tensor<T> {
        let n = numel(&shape);
        let data: Vec<T> = (0..n)
            .map(|_| T::from_f64(rng.random_range(lo..hi)))
            .collect();
        Tensor { shape, data: Arc::new(data), node: None }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn data_arc(&self) -> Arc<Vec<T>> {
        Arc::clone(&self.data)
    }

    /// Scalar extraction; panics if the tensor is not a single element.
    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    /// Whether this tensor is tracked on a tape.
    pub fn requires_grad(&self) -> bool {
        self.node.is_some()
    }

    pub(crate) fn node(&self) -> Option<&Node<T>> {
        self.node.as_ref()
    }

    pub(crate) fn val_id(&self) -> Option<ValId> {
        self.node.as_ref().map(|n| n.id)
    }

    /// Register this tensor as a tracked leaf on `tape`.
    pub fn tracked(&self, tape: &Tape<T>) -> Tensor<T> {
        let id = tape.register_value(self.shape.clone());
        Tensor {
            shape: self.shape.clone(),
            data: Arc::clone(&self.data),
            node: Some(Node { id, tape: tape.clone() }),
        }
    }

    /// A view of the same data with tracking removed.
    pub fn detached(&self) -> Tensor<T> {
        Tensor { shape: self.shape.clone(), data: Arc::clone(&self.data), node: None }
    }

    pub(crate) fn with_node(shape: Vec<usize>, data: Vec<T>, node: Option<Node<T>>) -> Tensor<T> {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor { shape, data: Arc::new(data), node }
    }

    /// Elementwise cast to another scalar type (detaches).
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        let data: Vec<U> = self.data.iter().map(|v| U::from_f64(v.into_f64())).collect();
        Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }
    }

    /// Clamp values into `[lo, hi]`. Not differentiable: inference-time only,
    /// so the result is always detached.
    pub fn clamped(&self, lo: T, hi: T) -> Tensor<T> {
        let data: Vec<T> = self.data.iter().map(|v| v.min(hi).max(lo)).collect();
        Tensor { shape: self.shape.clone(), data: Arc::new(data), node: None }
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", &self.data[..])?;
        }
        if self.node.is_some() {
            write!(f, " (tracked)")?;
        }
        Ok(())
    }
}
