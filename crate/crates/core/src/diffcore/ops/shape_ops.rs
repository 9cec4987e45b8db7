use super::record;
use crate::diffcore::error::{DiffError, Result};
use crate::diffcore::scalar::Scalar;
use crate::diffcore::tensor::{numel, Tensor};

/// Reinterpret the data with a new shape of equal element count.
pub fn reshape<T: Scalar>(x: &Tensor<T>, new_shape: Vec<usize>) -> Result<Tensor<T>> {
    if numel(&new_shape) != x.len() {
        return Err(DiffError::ShapeMismatch {
            op: "reshape",
            detail: format!("{:?} ({} elems) -> {:?}", x.shape(), x.len(), new_shape),
        });
    }
    let xid = x.val_id();
    record("reshape", new_shape, x.data().to_vec(), &[x], move |dout, sink| {
        if let Some(id) = xid {
            sink.add_assign(id, dout);
        }
    })
}

/// Concatenate tensors along `axis`. All other dimensions must agree.
pub fn concat<T: Scalar>(parts: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    if parts.is_empty() {
        return Err(DiffError::ShapeMismatch { op: "concat", detail: "no inputs".into() });
    }
    let rank = parts[0].shape().len();
    if axis >= rank {
        return Err(DiffError::ShapeMismatch {
            op: "concat",
            detail: format!("axis {} out of range for rank {}", axis, rank),
        });
    }
    for p in parts {
        if p.shape().len() != rank
            || (0..rank).any(|i| i != axis && p.shape()[i] != parts[0].shape()[i])
        {
            return Err(DiffError::ShapeMismatch {
                op: "concat",
                detail: format!("{:?} vs {:?} along axis {}", p.shape(), parts[0].shape(), axis),
            });
        }
    }
    let axis_sizes: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
    let total_axis: usize = axis_sizes.iter().sum();
    let mut out_shape = parts[0].shape().to_vec();
    out_shape[axis] = total_axis;
    let outer: usize = out_shape[..axis].iter().product::<usize>().max(1);
    let inner: usize = out_shape[axis + 1..].iter().product::<usize>().max(1);

    let mut data = vec![T::zero(); numel(&out_shape)];
    let mut offset = 0usize;
    for (p, &asz) in parts.iter().zip(&axis_sizes) {
        let pd = p.data();
        for o in 0..outer {
            let src = &pd[o * asz * inner..(o + 1) * asz * inner];
            let dst_base = o * total_axis * inner + offset * inner;
            data[dst_base..dst_base + asz * inner].copy_from_slice(src);
        }
        offset += asz;
    }

    let ids: Vec<Option<usize>> = parts.iter().map(|p| p.val_id()).collect();
    record("concat", out_shape, data, parts, move |dout, sink| {
        let mut offset = 0usize;
        for (pi, &asz) in axis_sizes.iter().enumerate() {
            if let Some(id) = ids[pi] {
                let buf = sink.buf_mut(id);
                for o in 0..outer {
                    let src_base = o * total_axis * inner + offset * inner;
                    let dst = &mut buf[o * asz * inner..(o + 1) * asz * inner];
                    for (d, s) in dst.iter_mut().zip(&dout[src_base..src_base + asz * inner]) {
                        *d += *s;
                    }
                }
            }
            offset += asz;
        }
    })
}

/// Copy the half-open range `[start, start+len)` along `axis`.
pub fn slice_axis<T: Scalar>(
    x: &Tensor<T>,
    axis: usize,
    start: usize,
    len: usize,
) -> Result<Tensor<T>> {
    let rank = x.shape().len();
    if axis >= rank || start + len > x.shape()[axis] {
        return Err(DiffError::ShapeMismatch {
            op: "slice_axis",
            detail: format!("[{}, {}+{}) out of {:?}", axis, start, len, x.shape()),
        });
    }
    let asz = x.shape()[axis];
    let outer: usize = x.shape()[..axis].iter().product::<usize>().max(1);
    let inner: usize = x.shape()[axis + 1..].iter().product::<usize>().max(1);
    let mut out_shape = x.shape().to_vec();
    out_shape[axis] = len;
    let xd = x.data();
    let mut data = vec![T::zero(); outer * len * inner];
    for o in 0..outer {
        let src_base = o * asz * inner + start * inner;
        data[o * len * inner..(o + 1) * len * inner]
            .copy_from_slice(&xd[src_base..src_base + len * inner]);
    }
    let xid = x.val_id();
    record("slice_axis", out_shape, data, &[x], move |dout, sink| {
        if let Some(id) = xid {
            let buf = sink.buf_mut(id);
            for o in 0..outer {
                let dst_base = o * asz * inner + start * inner;
                for (i, d) in dout[o * len * inner..(o + 1) * len * inner].iter().enumerate() {
                    buf[dst_base + i] += *d;
                }
            }
        }
    })
}
