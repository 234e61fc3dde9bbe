//! 3x3 stride-2 pooling with SAME-style window placement.
//!
//! Output spatial extent is ceil(in/2). Average pooling divides by the number
//! of in-bounds cells only, so constants pool to themselves.

use crate::tensor::{Scalar, Tensor};

const WIN: usize = 3;
const STRIDE: usize = 2;

fn out_extent(n: usize) -> usize {
    n.div_ceil(STRIDE)
}

fn pad_before(n: usize) -> isize {
    let out = out_extent(n);
    let pad_total = ((out - 1) * STRIDE + WIN).saturating_sub(n);
    (pad_total / 2) as isize
}

fn window(o: usize, n: usize) -> std::ops::Range<usize> {
    let start = o as isize * STRIDE as isize - pad_before(n);
    let lo = start.max(0) as usize;
    let hi = ((start + WIN as isize) as usize).min(n);
    lo..hi
}

pub fn avgpool_3x3_s2<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let (h, w, d) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (oh, ow) = (out_extent(h), out_extent(w));
    let mut out = Tensor::zeros(&[oh, ow, d]);
    for ou in 0..oh {
        let ys = window(ou, h);
        for ov in 0..ow {
            let xs = window(ov, w);
            let count = T::from_usize(ys.len() * xs.len()).unwrap();
            for c in 0..d {
                let mut acc = T::zero();
                for y in ys.clone() {
                    for x in xs.clone() {
                        acc = acc + input.get3(y, x, c);
                    }
                }
                out.set3(ou, ov, c, acc / count);
            }
        }
    }
    out
}

pub fn avgpool_3x3_s2_backward<T: Scalar>(
    input_shape: &[usize],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let (h, w, d) = (input_shape[0], input_shape[1], input_shape[2]);
    let (oh, ow) = (out_extent(h), out_extent(w));
    let mut grad_in = Tensor::zeros(&[h, w, d]);
    for ou in 0..oh {
        let ys = window(ou, h);
        for ov in 0..ow {
            let xs = window(ov, w);
            let count = T::from_usize(ys.len() * xs.len()).unwrap();
            for c in 0..d {
                let share = grad_out.get3(ou, ov, c) / count;
                for y in ys.clone() {
                    for x in xs.clone() {
                        let i = grad_in.idx3(y, x, c);
                        grad_in.data_mut()[i] = grad_in.data()[i] + share;
                    }
                }
            }
        }
    }
    grad_in
}

/// Max pooling; ties break to the first cell in row-major scan order.
pub fn maxpool_3x3_s2<T: Scalar>(input: &Tensor<T>) -> (Tensor<T>, Vec<usize>) {
    let (h, w, d) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (oh, ow) = (out_extent(h), out_extent(w));
    let mut out = Tensor::zeros(&[oh, ow, d]);
    let mut argmax = vec![0usize; oh * ow * d];
    for ou in 0..oh {
        let ys = window(ou, h);
        for ov in 0..ow {
            let xs = window(ov, w);
            for c in 0..d {
                let mut best = T::neg_infinity();
                let mut best_idx = 0usize;
                for y in ys.clone() {
                    for x in xs.clone() {
                        let v = input.get3(y, x, c);
                        if v > best {
                            best = v;
                            best_idx = input.idx3(y, x, c);
                        }
                    }
                }
                out.set3(ou, ov, c, best);
                argmax[(ou * ow + ov) * d + c] = best_idx;
            }
        }
    }
    (out, argmax)
}

pub fn maxpool_3x3_s2_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let mut grad_in = Tensor::zeros(input_shape);
    for (i, &g) in grad_out.data().iter().enumerate() {
        let src = argmax[i];
        grad_in.data_mut()[src] = grad_in.data()[src] + g;
    }
    grad_in
}
