use super::record;
use crate::diffcore::error::Result;
use crate::diffcore::scalar::{sc, Scalar};
use crate::diffcore::tensor::Tensor;

/// Sum of all elements, as a scalar tensor.
pub fn sum_all<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let total: T = x.data().iter().copied().sum();
    let n = x.len();
    let xid = x.val_id();
    record("sum_all", vec![], vec![total], &[x], move |dout, sink| {
        if let Some(id) = xid {
            let d = dout[0];
            sink.add_iter(id, std::iter::repeat(d).take(n));
        }
    })
}

/// Arithmetic mean of all elements, as a scalar tensor.
pub fn mean_all<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let n = x.len().max(1);
    let total: T = x.data().iter().copied().sum();
    let mean = total * sc::<T>(1.0 / n as f64);
    let xid = x.val_id();
    record("mean_all", vec![], vec![mean], &[x], move |dout, sink| {
        if let Some(id) = xid {
            let d = dout[0] * sc::<T>(1.0 / n as f64);
            sink.add_iter(id, std::iter::repeat(d).take(n));
        }
    })
}
