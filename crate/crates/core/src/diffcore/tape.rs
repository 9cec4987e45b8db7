//! Reverse-mode differentiation tape.
//!
//! Operations append an entry per output value during the forward pass;
//! [`backward`] replays the entries in exact reverse execution order and
//! accumulates vector-Jacobian products into per-value gradient buffers.
//! Gradients add across fan-out, so a value used twice receives the sum
//! of both contributions.

use std::sync::{Arc, Mutex};

use super::error::{DiffError, Result};
use super::scalar::Scalar;
use super::tensor::{numel, Tensor};

/// Identity of a value on a tape. Gradient buffers are keyed by this.
pub type ValId = usize;

type BackwardFn<T> = Box<dyn Fn(&[T], &mut GradBuffers<T>) + Send>;

struct Entry<T: Scalar> {
    out: ValId,
    backward: BackwardFn<T>,
}

struct TapeInner<T: Scalar> {
    shapes: Vec<Vec<usize>>,
    entries: Vec<Entry<T>>,
}

/// Shared handle to a recording tape.
pub struct Tape<T: Scalar> {
    inner: Arc<Mutex<TapeInner<T>>>,
}

impl<T: Scalar> Clone for Tape<T> {
    fn clone(&self) -> Self {
        Tape { inner: Arc::clone(&self.inner) }
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Tape<T> {
        Tape {
            inner: Arc::new(Mutex::new(TapeInner { shapes: Vec::new(), entries: Vec::new() })),
        }
    }

    pub(crate) fn same_tape(&self, other: &Tape<T>) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    /// Issue a fresh value id (leaf or op output).
    pub(crate) fn register_value(&self, shape: Vec<usize>) -> ValId {
        let mut inner = self.inner.lock().unwrap();
        let id = inner.shapes.len();
        inner.shapes.push(shape);
        id
    }

    pub(crate) fn push_entry(
        &self,
        out: ValId,
        backward: impl Fn(&[T], &mut GradBuffers<T>) + Send + 'static,
    ) {
        let mut inner = self.inner.lock().unwrap();
        inner.entries.push(Entry { out, backward: Box::new(backward) });
    }

    pub fn num_entries(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }
}

/// Per-value gradient accumulators, keyed by [`ValId`].
pub struct GradBuffers<T: Scalar> {
    bufs: Vec<Option<Vec<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> GradBuffers<T> {
    fn new(shapes: Vec<Vec<usize>>) -> Self {
        let bufs = shapes.iter().map(|_| None).collect();
        GradBuffers { bufs, shapes }
    }

    /// Mutable gradient buffer for `id`, zero-initialized on first touch.
    pub fn buf_mut(&mut self, id: ValId) -> &mut [T] {
        let n = numel(&self.shapes[id]);
        self.bufs[id].get_or_insert_with(|| vec![T::zero(); n])
    }

    /// Accumulate `contrib` elementwise into the buffer for `id`.
    pub fn add_assign(&mut self, id: ValId, contrib: &[T]) {
        let buf = self.buf_mut(id);
        debug_assert_eq!(buf.len(), contrib.len());
        for (b, c) in buf.iter_mut().zip(contrib) {
            *b += *c;
        }
    }

    /// Accumulate from an iterator (avoids a temporary allocation).
    pub fn add_iter(&mut self, id: ValId, contrib: impl Iterator<Item = T>) {
        let buf = self.buf_mut(id);
        let mut n = 0usize;
        for (b, c) in buf.iter_mut().zip(contrib) {
            *b += c;
            n += 1;
        }
        debug_assert_eq!(n, numel(&self.shapes[id]));
    }
}

/// Gradients produced by [`backward`], queryable by tensor.
pub struct Gradients<T: Scalar> {
    bufs: GradBuffers<T>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss w.r.t. `t`, if `t` is tracked and was reached.
    pub fn grad(&self, t: &Tensor<T>) -> Option<&[T]> {
        let id = t.val_id()?;
        self.bufs.bufs[id].as_deref()
    }

    /// Gradient, with unreachable (but tracked) tensors reported as zeros.
    pub fn grad_or_zeros(&self, t: &Tensor<T>) -> Vec<T> {
        match t.val_id() {
            Some(id) => self
                .bufs
                .bufs
                .get(id)
                .and_then(|b| b.clone())
                .unwrap_or_else(|| vec![T::zero(); t.len()]),
            None => vec![T::zero(); t.len()],
        }
    }
}

/// Run the backward pass from a scalar loss.
///
/// Every tracked value reachable from `loss` receives a gradient buffer;
/// values not on the path simply stay empty (reported as zeros).
pub fn backward<T: Scalar>(loss: &Tensor<T>) -> Result<Gradients<T>> {
    if loss.shape().iter().product::<usize>() != 1 {
        return Err(DiffError::NonScalarLoss(loss.shape().to_vec()));
    }
    let node = loss.node().ok_or(DiffError::UntrackedLoss)?;
    let inner = node.tape.inner.lock().unwrap();
    let mut bufs = GradBuffers::new(inner.shapes.clone());
    bufs.add_assign(node.id, &[T::one()]);
    for entry in inner.entries.iter().rev() {
        // Values that never received a gradient are off the loss path;
        // their entries contribute nothing.
        let dout = match &bufs.bufs[entry.out] {
            Some(d) => d.clone(),
            None => continue,
        };
        (entry.backward)(&dout, &mut bufs);
    }
    drop(inner);
    Ok(Gradients { bufs })
}
