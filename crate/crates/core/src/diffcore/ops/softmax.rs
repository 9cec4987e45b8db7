use super::record;
use crate::diffcore::error::{DiffError, Result};
use crate::diffcore::scalar::Scalar;
use crate::diffcore::tensor::Tensor;

/// Row softmax over the last dimension, with an optional additive logit
/// bias that broadcasts over leading dimensions.
///
/// The bias enters before normalization, so output rows always sum to 1.
/// Numerically stabilized by subtracting the row maximum.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>, bias: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let shape = logits.shape().to_vec();
    if shape.is_empty() {
        return Err(DiffError::ShapeMismatch {
            op: "softmax_rows",
            detail: "logits must have rank >= 1".into(),
        });
    }
    let cols = shape[shape.len() - 1];
    let rows = logits.len() / cols;

    // Bias must be a trailing sub-shape of the logits (leading-dim broadcast).
    let bias_len = match bias {
        Some(b) => {
            let bs = b.shape();
            let ls = &shape[shape.len() - bs.len()..];
            if bs.is_empty() || bs != ls || b.len() > logits.len() || logits.len() % b.len() != 0 {
                return Err(DiffError::ShapeMismatch {
                    op: "softmax_rows",
                    detail: format!("bias {:?} does not broadcast to {:?}", bs, shape),
                });
            }
            b.len()
        }
        None => 0,
    };

    let ld = logits.data();
    let bd = bias.map(|b| b.data_arc());
    let mut out = vec![T::zero(); logits.len()];
    for r in 0..rows {
        let base = r * cols;
        let mut max = T::neg_infinity();
        for c in 0..cols {
            let mut z = ld[base + c];
            if let Some(bd) = &bd {
                z += bd[(base + c) % bias_len];
            }
            if z > max {
                max = z;
            }
            out[base + c] = z;
        }
        let mut sum = T::zero();
        for c in 0..cols {
            let e = (out[base + c] - max).exp();
            out[base + c] = e;
            sum += e;
        }
        for c in 0..cols {
            out[base + c] /= sum;
        }
    }

    let prob = std::sync::Arc::new(out.clone());
    let lid = logits.val_id();
    let bid = bias.and_then(|b| b.val_id());
    let inputs: Vec<&Tensor<T>> = match bias {
        Some(b) => vec![logits, b],
        None => vec![logits],
    };
    record("softmax_rows", shape, out, &inputs, move |dout, sink| {
        // dz = p * (dout - sum(dout * p)) per row; bias grad reduces over
        // the broadcast leading dims.
        let mut dz = vec![T::zero(); dout.len()];
        for r in 0..rows {
            let base = r * cols;
            let mut dot = T::zero();
            for c in 0..cols {
                dot += dout[base + c] * prob[base + c];
            }
            for c in 0..cols {
                dz[base + c] = prob[base + c] * (dout[base + c] - dot);
            }
        }
        if let Some(id) = lid {
            sink.add_assign(id, &dz);
        }
        if let Some(id) = bid {
            let buf = sink.buf_mut(id);
            for (i, d) in dz.iter().enumerate() {
                buf[i % bias_len] += *d;
            }
        }
    })
}
