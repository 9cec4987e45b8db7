use std::sync::Arc;

use super::record;
use crate::diffcore::error::{DiffError, Result};
use crate::diffcore::scalar::Scalar;
use crate::diffcore::tensor::Tensor;

/// 2D cross-correlation of a [C, H, W] input with an [O, C, kh, kw]
/// kernel bank. Output spatial size is floor((H + 2p - kh)/s) + 1.
///
/// Implemented as im2col followed by a single gemm; the unrolled patch
/// matrix is kept for the backward pass.
pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    if x.shape().len() != 3 || kernel.shape().len() != 4 {
        return Err(DiffError::ShapeMismatch {
            op: "conv2d",
            detail: format!("expected x [C,H,W], kernel [O,C,kh,kw]; got {:?}, {:?}", x.shape(), kernel.shape()),
        });
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (o, kc, kh, kw) = (
        kernel.shape()[0],
        kernel.shape()[1],
        kernel.shape()[2],
        kernel.shape()[3],
    );
    if kc != c {
        return Err(DiffError::ShapeMismatch {
            op: "conv2d",
            detail: format!("input has {} channels, kernel expects {}", c, kc),
        });
    }
    if stride == 0 {
        return Err(DiffError::ShapeMismatch { op: "conv2d", detail: "stride must be >= 1".into() });
    }
    if kh > h + 2 * pad || kw > w + 2 * pad {
        return Err(DiffError::ShapeMismatch {
            op: "conv2d",
            detail: format!("kernel {}x{} larger than padded input {}x{}", kh, kw, h + 2 * pad, w + 2 * pad),
        });
    }
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;
    let ckk = c * kh * kw;
    let n_pix = ho * wo;

    let xd = x.data();
    let mut col = vec![T::zero(); n_pix * ckk];
    for oy in 0..ho {
        for ox in 0..wo {
            let row = (oy * wo + ox) * ckk;
            for cc in 0..c {
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                            col[row + cc * kh * kw + ky * kw + kx] =
                                xd[cc * h * w + iy as usize * w + ix as usize];
                        }
                    }
                }
            }
        }
    }

    // out[O, HoWo] = kernel_mat[O, CKK] . col^T
    let kd = kernel.data_arc();
    let mut out = vec![T::zero(); o * n_pix];
    T::gemm_strided(
        o, ckk, n_pix, T::one(),
        &kd, ckk as isize, 1,
        &col, 1, ckk as isize,
        T::zero(),
        &mut out,
    );

    let col = Arc::new(col);
    let (xid, kid) = (x.val_id(), kernel.val_id());
    record(
        "conv2d",
        vec![o, ho, wo],
        out,
        &[x, kernel],
        move |dout, sink| {
            if let Some(id) = kid {
                // dK[O, CKK] += dOut[O, HoWo] . col[HoWo, CKK]
                let buf = sink.buf_mut(id);
                T::gemm_strided(
                    o, n_pix, ckk, T::one(),
                    dout, n_pix as isize, 1,
                    &col, ckk as isize, 1,
                    T::one(),
                    buf,
                );
            }
            if let Some(id) = xid {
                // dCol[HoWo, CKK] = dOut^T . K, then scatter back through
                // the same im2col index map.
                let mut dcol = vec![T::zero(); n_pix * ckk];
                T::gemm_strided(
                    n_pix, o, ckk, T::one(),
                    dout, 1, n_pix as isize,
                    &kd, ckk as isize, 1,
                    T::zero(),
                    &mut dcol,
                );
                let buf = sink.buf_mut(id);
                for oy in 0..ho {
                    for ox in 0..wo {
                        let row = (oy * wo + ox) * ckk;
                        for cc in 0..c {
                            for ky in 0..kh {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                for kx in 0..kw {
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                        buf[cc * h * w + iy as usize * w + ix as usize] +=
                                            dcol[row + cc * kh * kw + ky * kw + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        },
    )
}

/// Nearest-neighbor 2x upsampling of a [C, H, W] map.
pub fn upsample_nearest2x<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape().len() != 3 {
        return Err(DiffError::ShapeMismatch {
            op: "upsample_nearest2x",
            detail: format!("expected [C,H,W], got {:?}", x.shape()),
        });
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (h2, w2) = (2 * h, 2 * w);
    let xd = x.data();
    let mut out = vec![T::zero(); c * h2 * w2];
    for cc in 0..c {
        for y in 0..h2 {
            for x2 in 0..w2 {
                out[cc * h2 * w2 + y * w2 + x2] = xd[cc * h * w + (y / 2) * w + x2 / 2];
            }
        }
    }
    let xid = x.val_id();
    record("upsample_nearest2x", vec![c, h2, w2], out, &[x], move |dout, sink| {
        if let Some(id) = xid {
            let buf = sink.buf_mut(id);
            for cc in 0..c {
                for y in 0..h2 {
                    for x2 in 0..w2 {
                        buf[cc * h * w + (y / 2) * w + x2 / 2] +=
                            dout[cc * h2 * w2 + y * w2 + x2];
                    }
                }
            }
        }
    })
}
