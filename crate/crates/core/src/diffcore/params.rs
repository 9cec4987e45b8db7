//! Named trainable parameters and the AdamW optimizer.
//!
//! A [`ParamStore`] owns the master copy of every parameter plus its
//! optimizer state. Each training step binds the store to a fresh tape
//! ([`ParamStore::bind`]), runs forward/backward, pulls gradients back
//! with [`ParamStore::accumulate_gradients`], and applies
//! [`ParamStore::adamw_step`]. Binding snapshots are cheap (shared
//! storage) and read-only, so concurrent forward passes over one store
//! are safe as long as no optimizer step overlaps them.

use std::collections::BTreeMap;

use super::error::{DiffError, Result};
use super::scalar::{sc, Scalar};
use super::tape::{Gradients, Tape};
use super::tensor::Tensor;

struct Param<T: Scalar> {
    value: Tensor<T>,
    grad: Option<Vec<T>>,
    moment1: Vec<T>,
    moment2: Vec<T>,
}

/// Named parameter map with per-parameter AdamW state.
pub struct ParamStore<T: Scalar> {
    params: BTreeMap<String, Param<T>>,
    step: u64,
}

/// Tape-bound (or detached) snapshot of every parameter in a store.
pub struct BoundParams<T: Scalar> {
    map: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> BoundParams<T> {
    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.map.get(name).ok_or_else(|| DiffError::UnknownParam(name.to_string()))
    }
}

/// AdamW hyperparameters. Decay is decoupled: applied directly to the
/// weights before the moment-based update term.
#[derive(Debug, Clone, Copy)]
pub struct AdamWParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
}

impl Default for AdamWParams {
    fn default() -> Self {
        AdamWParams { lr: 1e-4, beta1: 0.9, beta2: 0.999, weight_decay: 0.01, eps: 1e-8 }
    }
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> ParamStore<T> {
        ParamStore { params: BTreeMap::new(), step: 0 }
    }

    pub fn register(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(DiffError::DuplicateParam(name.to_string()));
        }
        let n = value.len();
        self.params.insert(
            name.to_string(),
            Param {
                value: value.detached(),
                grad: None,
                moment1: vec![T::zero(); n],
                moment2: vec![T::zero(); n],
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.params
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| DiffError::UnknownParam(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub(crate) fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    /// Replace a parameter's value (shape must match).
    pub fn set_value(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| DiffError::UnknownParam(name.to_string()))?;
        if p.value.shape() != value.shape() {
            return Err(DiffError::ShapeMismatch {
                op: "set_value",
                detail: format!("{:?} vs {:?}", p.value.shape(), value.shape()),
            });
        }
        p.value = value.detached();
        Ok(())
    }

    /// Add `delta` to one coordinate of a parameter (finite-difference probes).
    pub fn nudge(&mut self, name: &str, index: usize, delta: T) -> Result<()> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| DiffError::UnknownParam(name.to_string()))?;
        let mut data = p.value.data().to_vec();
        data[index] += delta;
        p.value = Tensor::from_vec(p.value.shape().to_vec(), data)?;
        Ok(())
    }

    /// Tracked snapshot of every parameter on `tape`.
    pub fn bind(&self, tape: &Tape<T>) -> BoundParams<T> {
        let map = self
            .params
            .iter()
            .map(|(name, p)| (name.clone(), p.value.tracked(tape)))
            .collect();
        BoundParams { map }
    }

    /// Detached snapshot for inference and finite-difference evaluation.
    pub fn bind_untracked(&self) -> BoundParams<T> {
        let map = self
            .params
            .iter()
            .map(|(name, p)| (name.clone(), p.value.detached()))
            .collect();
        BoundParams { map }
    }

    /// Pull gradients for every bound parameter out of a backward result.
    /// Parameters the loss never reached receive explicit zeros.
    pub fn accumulate_gradients(&mut self, bound: &BoundParams<T>, grads: &Gradients<T>) {
        for (name, p) in self.params.iter_mut() {
            if let Some(t) = bound.map.get(name) {
                let g = grads.grad_or_zeros(t);
                match &mut p.grad {
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&g) {
                            *a += *b;
                        }
                    }
                    None => p.grad = Some(g),
                }
            }
        }
    }

    pub fn clear_gradients(&mut self) {
        for p in self.params.values_mut() {
            p.grad = None;
        }
    }

    /// One AdamW update. Errors if any parameter has no gradient for this
    /// step. Consumes the gradients.
    pub fn adamw_step(&mut self, hp: &AdamWParams) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let lr = sc::<T>(hp.lr);
        let b1 = sc::<T>(hp.beta1);
        let b2 = sc::<T>(hp.beta2);
        let wd = sc::<T>(hp.weight_decay);
        let eps = sc::<T>(hp.eps);
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        for (name, p) in self.params.iter_mut() {
            let grad = p.grad.take().ok_or_else(|| DiffError::MissingGradient(name.clone()))?;
            let mut value = p.value.data().to_vec();
            for i in 0..value.len() {
                // Decoupled decay first, then the bias-corrected moment term.
                let decayed = value[i] - lr * wd * value[i];
                value[i] = decayed;
                let g = grad[i];
                p.moment1[i] = b1 * p.moment1[i] + (T::one() - b1) * g;
                p.moment2[i] = b2 * p.moment2[i] + (T::one() - b2) * g * g;
                let m_hat = p.moment1[i] / bc1;
                let v_hat = p.moment2[i] / bc2;
                value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.value = Tensor::from_vec(p.value.shape().to_vec(), value)?;
        }
        Ok(())
    }

    pub(crate) fn export_entries(&self) -> Vec<(String, &Tensor<T>, &[T], &[T])> {
        self.params
            .iter()
            .map(|(n, p)| (n.clone(), &p.value, p.moment1.as_slice(), p.moment2.as_slice()))
            .collect()
    }

    pub(crate) fn import_moments(&mut self, name: &str, m1: Vec<T>, m2: Vec<T>) -> Result<()> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| DiffError::UnknownParam(name.to_string()))?;
        if m1.len() != p.value.len() || m2.len() != p.value.len() {
            return Err(DiffError::Checkpoint(format!("moment size mismatch for '{}'", name)));
        }
        p.moment1 = m1;
        p.moment2 = m2;
        Ok(())
    }
}
