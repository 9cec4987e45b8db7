use super::record;
use crate::diffcore::error::{DiffError, Result};
use crate::diffcore::scalar::{sc, Scalar};
use crate::diffcore::tensor::Tensor;

/// Normalize rows to zero mean and unit variance over the last dimension,
/// then apply the per-feature affine `y * gain + offset`.
pub fn layer_norm<T: Scalar>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    offset: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let shape = x.shape().to_vec();
    let d = *shape.last().ok_or_else(|| DiffError::ShapeMismatch {
        op: "layer_norm",
        detail: "input must have rank >= 1".into(),
    })?;
    if gain.shape() != [d] || offset.shape() != [d] {
        return Err(DiffError::ShapeMismatch {
            op: "layer_norm",
            detail: format!(
                "gain {:?} / offset {:?} do not match last dim {}",
                gain.shape(),
                offset.shape(),
                d
            ),
        });
    }
    if eps <= 0.0 {
        return Err(DiffError::ShapeMismatch {
            op: "layer_norm",
            detail: format!("eps must be positive, got {}", eps),
        });
    }
    let rows = x.len() / d;
    let eps = sc::<T>(eps);
    let xd = x.data();
    let (gd, od) = (gain.data_arc(), offset.data_arc());
    let mut out = vec![T::zero(); x.len()];
    let mut norm = vec![T::zero(); x.len()]; // (x - mu) / sigma, saved for backward
    let mut inv_sigma = vec![T::zero(); rows];
    let nr = sc::<T>(1.0 / d as f64);
    for r in 0..rows {
        let base = r * d;
        let mut mean = T::zero();
        for c in 0..d {
            mean += xd[base + c];
        }
        mean *= nr;
        let mut var = T::zero();
        for c in 0..d {
            let dv = xd[base + c] - mean;
            var += dv * dv;
        }
        var *= nr;
        let is = (var + eps).sqrt().recip();
        inv_sigma[r] = is;
        for c in 0..d {
            let y = (xd[base + c] - mean) * is;
            norm[base + c] = y;
            out[base + c] = y * gd[c] + od[c];
        }
    }
    let norm = std::sync::Arc::new(norm);
    let inv_sigma = std::sync::Arc::new(inv_sigma);
    let (xid, gid, oid) = (x.val_id(), gain.val_id(), offset.val_id());
    record("layer_norm", shape, out, &[x, gain, offset], move |dout, sink| {
        if let Some(id) = xid {
            let buf = sink.buf_mut(id);
            for r in 0..rows {
                let base = r * d;
                let mut mean_dy = T::zero();
                let mut mean_dyy = T::zero();
                for c in 0..d {
                    let dy = dout[base + c] * gd[c];
                    mean_dy += dy;
                    mean_dyy += dy * norm[base + c];
                }
                mean_dy *= nr;
                mean_dyy *= nr;
                for c in 0..d {
                    let dy = dout[base + c] * gd[c];
                    buf[base + c] += inv_sigma[r] * (dy - mean_dy - norm[base + c] * mean_dyy);
                }
            }
        }
        if let Some(id) = gid {
            let buf = sink.buf_mut(id);
            for (i, dv) in dout.iter().enumerate() {
                buf[i % d] += *dv * norm[i];
            }
        }
        if let Some(id) = oid {
            let buf = sink.buf_mut(id);
            for (i, dv) in dout.iter().enumerate() {
                buf[i % d] += *dv;
            }
        }
    })
}

/// Group normalization over a [C, H, W] feature map with per-channel affine.
pub fn group_norm<T: Scalar>(
    x: &Tensor<T>,
    groups: usize,
    gain: &Tensor<T>,
    offset: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let shape = x.shape().to_vec();
    if shape.len() != 3 {
        return Err(DiffError::ShapeMismatch {
            op: "group_norm",
            detail: format!("expected [C,H,W], got {:?}", shape),
        });
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    if groups == 0 || c % groups != 0 {
        return Err(DiffError::ShapeMismatch {
            op: "group_norm",
            detail: format!("{} channels not divisible into {} groups", c, groups),
        });
    }
    if gain.shape() != [c] || offset.shape() != [c] {
        return Err(DiffError::ShapeMismatch {
            op: "group_norm",
            detail: format!("affine shapes {:?}/{:?} vs channels {}", gain.shape(), offset.shape(), c),
        });
    }
    let hw = h * w;
    let gsize = (c / groups) * hw;
    let eps = sc::<T>(eps);
    let ng = sc::<T>(1.0 / gsize as f64);
    let xd = x.data();
    let (gd, od) = (gain.data_arc(), offset.data_arc());
    let mut out = vec![T::zero(); x.len()];
    let mut norm = vec![T::zero(); x.len()];
    let mut inv_sigma = vec![T::zero(); groups];
    for g in 0..groups {
        let base = g * gsize;
        let mut mean = T::zero();
        for i in 0..gsize {
            mean += xd[base + i];
        }
        mean *= ng;
        let mut var = T::zero();
        for i in 0..gsize {
            let dv = xd[base + i] - mean;
            var += dv * dv;
        }
        var *= ng;
        let is = (var + eps).sqrt().recip();
        inv_sigma[g] = is;
        for i in 0..gsize {
            let y = (xd[base + i] - mean) * is;
            norm[base + i] = y;
            let ch = (base + i) / hw;
            out[base + i] = y * gd[ch] + od[ch];
        }
    }
    let norm = std::sync::Arc::new(norm);
    let inv_sigma = std::sync::Arc::new(inv_sigma);
    let (xid, gid, oid) = (x.val_id(), gain.val_id(), offset.val_id());
    record("group_norm", shape, out, &[x, gain, offset], move |dout, sink| {
        if let Some(id) = xid {
            let buf = sink.buf_mut(id);
            for g in 0..groups {
                let base = g * gsize;
                let mut mean_dy = T::zero();
                let mut mean_dyy = T::zero();
                for i in 0..gsize {
                    let dy = dout[base + i] * gd[(base + i) / hw];
                    mean_dy += dy;
                    mean_dyy += dy * norm[base + i];
                }
                mean_dy *= ng;
                mean_dyy *= ng;
                for i in 0..gsize {
                    let dy = dout[base + i] * gd[(base + i) / hw];
                    buf[base + i] += inv_sigma[g] * (dy - mean_dy - norm[base + i] * mean_dyy);
                }
            }
        }
        if let Some(id) = gid {
            let buf = sink.buf_mut(id);
            for (i, dv) in dout.iter().enumerate() {
                buf[i / hw] += *dv * norm[i];
            }
        }
        if let Some(id) = oid {
            let buf = sink.buf_mut(id);
            for (i, dv) in dout.iter().enumerate() {
                buf[i / hw] += *dv;
            }
        }
    })
}
