use super::record;
use crate::diffcore::error::{DiffError, Result};
use crate::diffcore::scalar::Scalar;
use crate::diffcore::tensor::Tensor;

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

/// Leading-dim broadcast plan for batched matmul.
///
/// Returns (output batch dims, per-output-batch offsets into a, offsets
/// into b), offsets counted in matrix slots.
fn batch_plan(
    op: &'static str,
    a_batch: &[usize],
    b_batch: &[usize],
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let rank = a_batch.len().max(b_batch.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let ad = if i + a_batch.len() >= rank { a_batch[i + a_batch.len() - rank] } else { 1 };
        let bd = if i + b_batch.len() >= rank { b_batch[i + b_batch.len() - rank] } else { 1 };
        if ad != bd && ad != 1 && bd != 1 {
            return Err(DiffError::ShapeMismatch {
                op,
                detail: format!("batch dims {:?} vs {:?} not broadcastable", a_batch, b_batch),
            });
        }
        out[i] = ad.max(bd);
    }
    let n_batches: usize = out.iter().product::<usize>().max(1);
    let mut a_offsets = Vec::with_capacity(n_batches);
    let mut b_offsets = Vec::with_capacity(n_batches);
    let a_strides = row_major_strides(a_batch);
    let b_strides = row_major_strides(b_batch);
    for lin in 0..n_batches {
        let mut rem = lin;
        let mut a_off = 0usize;
        let mut b_off = 0usize;
        for i in 0..rank {
            let tail: usize = out[i + 1..].iter().product::<usize>().max(1);
            let idx = rem / tail;
            rem %= tail;
            if i + a_batch.len() >= rank {
                let j = i + a_batch.len() - rank;
                if a_batch[j] != 1 {
                    a_off += idx * a_strides[j];
                }
            }
            if i + b_batch.len() >= rank {
                let j = i + b_batch.len() - rank;
                if b_batch[j] != 1 {
                    b_off += idx * b_strides[j];
                }
            }
        }
        a_offsets.push(a_off);
        b_offsets.push(b_off);
    }
    Ok((out, a_offsets, b_offsets))
}

fn matrix_dims<'a, T: Scalar>(
    op: &'static str,
    t: &'a Tensor<T>,
) -> Result<(&'a [usize], usize, usize)> {
    let s = t.shape();
    if s.len() < 2 {
        return Err(DiffError::ShapeMismatch {
            op,
            detail: format!("expected rank >= 2, got {:?}", s),
        });
    }
    Ok((&s[..s.len() - 2], s[s.len() - 2], s[s.len() - 1]))
}

/// Batched matrix product `a @ b` with leading-dim broadcasting.
///
/// Gradients: dA = dC.Bt, dB = At.dC, accumulated per batch slot.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (a_batch, m, ka) = matrix_dims("matmul", a)?;
    let (b_batch, kb, n) = matrix_dims("matmul", b)?;
    if ka != kb {
        return Err(DiffError::ShapeMismatch {
            op: "matmul",
            detail: format!("inner dims disagree: {:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let k = ka;
    let (out_batch, a_offs, b_offs) = batch_plan("matmul", a_batch, b_batch)?;
    let n_batches = a_offs.len();
    let mut data = vec![T::zero(); n_batches * m * n];
    let (ad, bd) = (a.data_arc(), b.data_arc());
    for lin in 0..n_batches {
        let asl = &ad[a_offs[lin] * m * k..a_offs[lin] * m * k + m * k];
        let bsl = &bd[b_offs[lin] * k * n..b_offs[lin] * k * n + k * n];
        T::gemm_strided(
            m, k, n, T::one(),
            asl, k as isize, 1,
            bsl, n as isize, 1,
            T::zero(),
            &mut data[lin * m * n..(lin + 1) * m * n],
        );
    }
    let mut out_shape = out_batch;
    out_shape.push(m);
    out_shape.push(n);
    let (aid, bid) = (a.val_id(), b.val_id());
    record("matmul", out_shape, data, &[a, b], move |dout, sink| {
        if let Some(id) = aid {
            let buf = sink.buf_mut(id);
            for lin in 0..n_batches {
                // dA = dC . B^T
                let d = &dout[lin * m * n..(lin + 1) * m * n];
                let bsl = &bd[b_offs[lin] * k * n..b_offs[lin] * k * n + k * n];
                T::gemm_strided(
                    m, n, k, T::one(),
                    d, n as isize, 1,
                    bsl, 1, n as isize,
                    T::one(),
                    &mut buf[a_offs[lin] * m * k..a_offs[lin] * m * k + m * k],
                );
            }
        }
        if let Some(id) = bid {
            let buf = sink.buf_mut(id);
            for lin in 0..n_batches {
                // dB = A^T . dC
                let d = &dout[lin * m * n..(lin + 1) * m * n];
                let asl = &ad[a_offs[lin] * m * k..a_offs[lin] * m * k + m * k];
                T::gemm_strided(
                    k, m, n, T::one(),
                    asl, 1, k as isize,
                    d, n as isize, 1,
                    T::one(),
                    &mut buf[b_offs[lin] * k * n..b_offs[lin] * k * n + k * n],
                );
            }
        }
    })
}

/// Batched `a @ b^T` where `b` is stored as [.., n, k].
pub fn matmul_nt<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (a_batch, m, ka) = matrix_dims("matmul_nt", a)?;
    let (b_batch, n, kb) = matrix_dims("matmul_nt", b)?;
    if ka != kb {
        return Err(DiffError::ShapeMismatch {
            op: "matmul_nt",
            detail: format!("inner dims disagree: {:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let k = ka;
    let (out_batch, a_offs, b_offs) = batch_plan("matmul_nt", a_batch, b_batch)?;
    let n_batches = a_offs.len();
    let mut data = vec![T::zero(); n_batches * m * n];
    let (ad, bd) = (a.data_arc(), b.data_arc());
    for lin in 0..n_batches {
        let asl = &ad[a_offs[lin] * m * k..a_offs[lin] * m * k + m * k];
        let bsl = &bd[b_offs[lin] * n * k..b_offs[lin] * n * k + n * k];
        T::gemm_strided(
            m, k, n, T::one(),
            asl, k as isize, 1,
            bsl, 1, k as isize,
            T::zero(),
            &mut data[lin * m * n..(lin + 1) * m * n],
        );
    }
    let mut out_shape = out_batch;
    out_shape.push(m);
    out_shape.push(n);
    let (aid, bid) = (a.val_id(), b.val_id());
    record("matmul_nt", out_shape, data, &[a, b], move |dout, sink| {
        if let Some(id) = aid {
            let buf = sink.buf_mut(id);
            for lin in 0..n_batches {
                // dA = dC . B
                let d = &dout[lin * m * n..(lin + 1) * m * n];
                let bsl = &bd[b_offs[lin] * n * k..b_offs[lin] * n * k + n * k];
                T::gemm_strided(
                    m, n, k, T::one(),
                    d, n as isize, 1,
                    bsl, k as isize, 1,
                    T::one(),
                    &mut buf[a_offs[lin] * m * k..a_offs[lin] * m * k + m * k],
                );
            }
        }
        if let Some(id) = bid {
            let buf = sink.buf_mut(id);
            for lin in 0..n_batches {
                // dB = dC^T . A
                let d = &dout[lin * m * n..(lin + 1) * m * n];
                let asl = &ad[a_offs[lin] * m * k..a_offs[lin] * m * k + m * k];
                T::gemm_strided(
                    n, m, k, T::one(),
                    d, 1, n as isize,
                    asl, k as isize, 1,
                    T::one(),
                    &mut buf[b_offs[lin] * n * k..b_offs[lin] * n * k + n * k],
                );
            }
        }
    })
}

/// Batched `a^T @ b` where `a` is stored as [.., k, m].
pub fn matmul_tn<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (a_batch, ka, m) = matrix_dims("matmul_tn", a)?;
    let (b_batch, kb, n) = matrix_dims("matmul_tn", b)?;
    if ka != kb {
        return Err(DiffError::ShapeMismatch {
            op: "matmul_tn",
            detail: format!("inner dims disagree: {:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let k = ka;
    let (out_batch, a_offs, b_offs) = batch_plan("matmul_tn", a_batch, b_batch)?;
    let n_batches = a_offs.len();
    let mut data = vec![T::zero(); n_batches * m * n];
    let (ad, bd) = (a.data_arc(), b.data_arc());
    for lin in 0..n_batches {
        let asl = &ad[a_offs[lin] * k * m..a_offs[lin] * k * m + k * m];
        let bsl = &bd[b_offs[lin] * k * n..b_offs[lin] * k * n + k * n];
        T::gemm_strided(
            m, k, n, T::one(),
            asl, 1, m as isize,
            bsl, n as isize, 1,
            T::zero(),
            &mut data[lin * m * n..(lin + 1) * m * n],
        );
    }
    let mut out_shape = out_batch;
    out_shape.push(m);
    out_shape.push(n);
    let (aid, bid) = (a.val_id(), b.val_id());
    record("matmul_tn", out_shape, data, &[a, b], move |dout, sink| {
        if let Some(id) = aid {
            let buf = sink.buf_mut(id);
            for lin in 0..n_batches {
                // dA = B . dC^T
                let d = &dout[lin * m * n..(lin + 1) * m * n];
                let bsl = &bd[b_offs[lin] * k * n..b_offs[lin] * k * n + k * n];
                T::gemm_strided(
                    k, n, m, T::one(),
                    bsl, n as isize, 1,
                    d, 1, n as isize,
                    T::one(),
                    &mut buf[a_offs[lin] * k * m..a_offs[lin] * k * m + k * m],
                );
            }
        }
        if let Some(id) = bid {
            let buf = sink.buf_mut(id);
            for lin in 0..n_batches {
                // dB = A . dC
                let d = &dout[lin * m * n..(lin + 1) * m * n];
                let asl = &ad[a_offs[lin] * k * m..a_offs[lin] * k * m + k * m];
                T::gemm_strided(
                    k, m, n, T::one(),
                    asl, m as isize, 1,
                    d, n as isize, 1,
                    T::one(),
                    &mut buf[b_offs[lin] * k * n..b_offs[lin] * k * n + k * n],
                );
            }
        }
    })
}

/// Swap the last two dimensions (materialized copy).
pub fn transpose2d<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, r, c) = matrix_dims("transpose2d", x)?;
    let n_batches: usize = batch.iter().product::<usize>().max(1);
    let xd = x.data();
    let mut data = vec![T::zero(); xd.len()];
    for b in 0..n_batches {
        let src = &xd[b * r * c..(b + 1) * r * c];
        let dst = &mut data[b * r * c..(b + 1) * r * c];
        for i in 0..r {
            for j in 0..c {
                dst[j * r + i] = src[i * c + j];
            }
        }
    }
    let mut out_shape = batch.to_vec();
    out_shape.push(c);
    out_shape.push(r);
    let xid = x.val_id();
    record("transpose2d", out_shape, data, &[x], move |dout, sink| {
        if let Some(id) = xid {
            let buf = sink.buf_mut(id);
            for b in 0..n_batches {
                let d = &dout[b * r * c..(b + 1) * r * c];
                let g = &mut buf[b * r * c..(b + 1) * r * c];
                for i in 0..r {
                    for j in 0..c {
                        g[i * c + j] += d[j * r + i];
                    }
                }
            }
        }
    })
}

/// Reorder axes: `out[idx] = x[idx mapped through axes]`.
pub fn permute<T: Scalar>(x: &Tensor<T>, axes: &[usize]) -> Result<Tensor<T>> {
    let rank = x.shape().len();
    let mut seen = vec![false; rank];
    if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
        return Err(DiffError::ShapeMismatch {
            op: "permute",
            detail: format!("axes {:?} invalid for rank {}", axes, rank),
        });
    }
    let in_strides = row_major_strides(x.shape());
    let out_shape: Vec<usize> = axes.iter().map(|&a| x.shape()[a]).collect();
    let mapped_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let n = x.len();
    let xd = x.data();
    let mut data = vec![T::zero(); n];
    let mut src_of_dst = vec![0usize; n];
    for (lin, slot) in src_of_dst.iter_mut().enumerate() {
        let mut rem = lin;
        let mut src = 0usize;
        for i in 0..rank {
            let tail: usize = out_shape[i + 1..].iter().product::<usize>().max(1);
            src += (rem / tail) * mapped_strides[i];
            rem %= tail;
        }
        *slot = src;
    }
    for (dst, &src) in data.iter_mut().zip(src_of_dst.iter()) {
        *dst = xd[src];
    }
    let xid = x.val_id();
    record("permute", out_shape, data, &[x], move |dout, sink| {
        if let Some(id) = xid {
            let buf = sink.buf_mut(id);
            for (lin, &src) in src_of_dst.iter().enumerate() {
                buf[src] += dout[lin];
            }
        }
    })
}
