use super::{record, same_shape};
use crate::diffcore::error::{DiffError, Result};
use crate::diffcore::scalar::{sc, Scalar};
use crate::diffcore::tensor::Tensor;

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("add", a, b)?;
    let data: Vec<T> = a.data().iter().zip(b.data()).map(|(x, y)| *x + *y).collect();
    let (aid, bid) = (a.val_id(), b.val_id());
    record("add", a.shape().to_vec(), data, &[a, b], move |dout, sink| {
        if let Some(id) = aid {
            sink.add_assign(id, dout);
        }
        if let Some(id) = bid {
            sink.add_assign(id, dout);
        }
    })
}

pub fn sub<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("sub", a, b)?;
    let data: Vec<T> = a.data().iter().zip(b.data()).map(|(x, y)| *x - *y).collect();
    let (aid, bid) = (a.val_id(), b.val_id());
    record("sub", a.shape().to_vec(), data, &[a, b], move |dout, sink| {
        if let Some(id) = aid {
            sink.add_assign(id, dout);
        }
        if let Some(id) = bid {
            sink.add_iter(id, dout.iter().map(|d| -*d));
        }
    })
}

pub fn mul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("mul", a, b)?;
    let data: Vec<T> = a.data().iter().zip(b.data()).map(|(x, y)| *x * *y).collect();
    let (aid, bid) = (a.val_id(), b.val_id());
    let (ad, bd) = (a.data_arc(), b.data_arc());
    record("mul", a.shape().to_vec(), data, &[a, b], move |dout, sink| {
        if let Some(id) = aid {
            sink.add_iter(id, dout.iter().zip(bd.iter()).map(|(d, y)| *d * *y));
        }
        if let Some(id) = bid {
            sink.add_iter(id, dout.iter().zip(ad.iter()).map(|(d, x)| *d * *x));
        }
    })
}

pub fn neg<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let data: Vec<T> = a.data().iter().map(|x| -*x).collect();
    let aid = a.val_id();
    record("neg", a.shape().to_vec(), data, &[a], move |dout, sink| {
        if let Some(id) = aid {
            sink.add_iter(id, dout.iter().map(|d| -*d));
        }
    })
}

/// Multiply by a compile-time constant (not a tracked value).
pub fn scale<T: Scalar>(a: &Tensor<T>, factor: T) -> Result<Tensor<T>> {
    let data: Vec<T> = a.data().iter().map(|x| *x * factor).collect();
    let aid = a.val_id();
    record("scale", a.shape().to_vec(), data, &[a], move |dout, sink| {
        if let Some(id) = aid {
            sink.add_iter(id, dout.iter().map(|d| *d * factor));
        }
    })
}

/// Add a constant to every element.
pub fn add_scalar<T: Scalar>(a: &Tensor<T>, offset: T) -> Result<Tensor<T>> {
    let data: Vec<T> = a.data().iter().map(|x| *x + offset).collect();
    let aid = a.val_id();
    record("add_scalar", a.shape().to_vec(), data, &[a], move |dout, sink| {
        if let Some(id) = aid {
            sink.add_assign(id, dout);
        }
    })
}

pub fn relu<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let data: Vec<T> = a.data().iter().map(|x| x.max(T::zero())).collect();
    let aid = a.val_id();
    let ad = a.data_arc();
    record("relu", a.shape().to_vec(), data, &[a], move |dout, sink| {
        if let Some(id) = aid {
            sink.add_iter(
                id,
                dout.iter()
                    .zip(ad.iter())
                    .map(|(d, x)| if *x > T::zero() { *d } else { T::zero() }),
            );
        }
    })
}

fn sigmoid<T: Scalar>(x: T) -> T {
    sc::<T>(1.0) / (sc::<T>(1.0) + (-x).exp())
}

/// x * sigmoid(x).
pub fn silu<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let data: Vec<T> = a.data().iter().map(|x| *x * sigmoid(*x)).collect();
    let aid = a.val_id();
    let ad = a.data_arc();
    record("silu", a.shape().to_vec(), data, &[a], move |dout, sink| {
        if let Some(id) = aid {
            sink.add_iter(
                id,
                dout.iter().zip(ad.iter()).map(|(d, x)| {
                    let s = sigmoid(*x);
                    *d * s * (T::one() + *x * (T::one() - s))
                }),
            );
        }
    })
}

/// Add a length-D vector to the last dimension of `x`.
pub fn add_bias<T: Scalar>(x: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let d = *x.shape().last().ok_or_else(|| DiffError::ShapeMismatch {
        op: "add_bias",
        detail: "input must have rank >= 1".into(),
    })?;
    if bias.shape() != [d] {
        return Err(DiffError::ShapeMismatch {
            op: "add_bias",
            detail: format!("bias {:?} does not match last dim {}", bias.shape(), d),
        });
    }
    let bd = bias.data_arc();
    let data: Vec<T> = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| *v + bd[i % d])
        .collect();
    let (xid, bid) = (x.val_id(), bias.val_id());
    record("add_bias", x.shape().to_vec(), data, &[x, bias], move |dout, sink| {
        if let Some(id) = xid {
            sink.add_assign(id, dout);
        }
        if let Some(id) = bid {
            let buf = sink.buf_mut(id);
            for (i, dv) in dout.iter().enumerate() {
                buf[i % d] += *dv;
            }
        }
    })
}

/// Add a per-channel value to a [C, H, W] feature map.
pub fn add_channel_bias<T: Scalar>(x: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape().len() != 3 {
        return Err(DiffError::ShapeMismatch {
            op: "add_channel_bias",
            detail: format!("expected [C,H,W], got {:?}", x.shape()),
        });
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if bias.shape() != [c] {
        return Err(DiffError::ShapeMismatch {
            op: "add_channel_bias",
            detail: format!("bias {:?} does not match channels {}", bias.shape(), c),
        });
    }
    let hw = h * w;
    let bd = bias.data_arc();
    let data: Vec<T> = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| *v + bd[i / hw])
        .collect();
    let (xid, bid) = (x.val_id(), bias.val_id());
    record(
        "add_channel_bias",
        x.shape().to_vec(),
        data,
        &[x, bias],
        move |dout, sink| {
            if let Some(id) = xid {
                sink.add_assign(id, dout);
            }
            if let Some(id) = bid {
                let buf = sink.buf_mut(id);
                for (i, dv) in dout.iter().enumerate() {
                    buf[i / hw] += *dv;
                }
            }
        },
    )
}
