//! 2-D convolution with SAME zero padding, stride 1.

use crate::tensor::{Scalar, Tensor, TensorError};

/// Convolution kernels [K1, K2, D1, D2] and per-output-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T: Scalar> {
    pub kernels: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(kernels: Tensor<T>, bias: Vec<T>) -> Self {
        assert_eq!(kernels.shape().len(), 4);
        assert_eq!(kernels.shape()[3], bias.len());
        ConvParams { kernels, bias }
    }

    pub fn k1(&self) -> usize {
        self.kernels.shape()[0]
    }
    pub fn k2(&self) -> usize {
        self.kernels.shape()[1]
    }
    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[2]
    }
    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[3]
    }
}

/// Gradients mirroring [`ConvParams`].
#[derive(Debug, Clone)]
pub struct ConvGrads<T: Scalar> {
    pub kernels: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvGrads<T> {
    pub fn zeros_like(p: &ConvParams<T>) -> Self {
        ConvGrads {
            kernels: Tensor::zeros(p.kernels.shape()),
            bias: vec![T::zero(); p.bias.len()],
        }
    }
}

#[inline]
fn pad_before(k: usize) -> usize {
    (k - 1) / 2
}

/// Cross-correlation with SAME zero padding; output spatial extents equal the
/// input's. Input is [H, W, D1], output [H, W, D2].
pub fn conv2d_same<T: Scalar>(
    input: &Tensor<T>,
    p: &ConvParams<T>,
) -> Result<Tensor<T>, TensorError> {
    let (h, w, d1) = match input.shape() {
        [h, w, d] => (*h, *w, *d),
        s => {
            return Err(TensorError::ShapeMismatch(format!(
                "conv2d_same expects rank-3 input, got {s:?}"
            )))
        }
    };
    if d1 != p.in_channels() {
        return Err(TensorError::ShapeMismatch(format!(
            "conv2d_same: input depth {} does not match kernel D1 {}",
            d1,
            p.in_channels()
        )));
    }
    let (k1, k2, d2) = (p.k1(), p.k2(), p.out_channels());
    let (pb1, pb2) = (pad_before(k1) as isize, pad_before(k2) as isize);

    let mut out = Tensor::zeros(&[h, w, d2]);
    let kdata = p.kernels.data();
    for u in 0..h {
        for v in 0..w {
            let obase = (u * w + v) * d2;
            let orow = &mut out.data_mut()[obase..obase + d2];
            orow.copy_from_slice(&p.bias);
            for m in 0..k1 {
                let y = u as isize + m as isize - pb1;
                if y < 0 || y >= h as isize {
                    continue;
                }
                for n in 0..k2 {
                    let x = v as isize + n as isize - pb2;
                    if x < 0 || x >= w as isize {
                        continue;
                    }
                    let ibase = (y as usize * w + x as usize) * d1;
                    for i in 0..d1 {
                        let xv = input.data()[ibase + i];
                        let kbase = ((m * k2 + n) * d1 + i) * d2;
                        let krow = &kdata[kbase..kbase + d2];
                        for (o, &kv) in orow.iter_mut().zip(krow) {
                            *o = *o + xv * kv;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Backward pass: gradients w.r.t. input, kernels, and bias.
pub fn conv2d_same_backward<T: Scalar>(
    input: &Tensor<T>,
    p: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, ConvGrads<T>), TensorError> {
    let (h, w, d1) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (k1, k2, d2) = (p.k1(), p.k2(), p.out_channels());
    if grad_out.shape() != [h, w, d2] {
        return Err(TensorError::ShapeMismatch(format!(
            "conv2d_same_backward: grad_out shape {:?}, expected [{h}, {w}, {d2}]",
            grad_out.shape()
        )));
    }
    let (pb1, pb2) = (pad_before(k1) as isize, pad_before(k2) as isize);

    let mut grad_in = Tensor::zeros(&[h, w, d1]);
    let mut grads = ConvGrads::zeros_like(p);
    let kdata = p.kernels.data();

    for u in 0..h {
        for v in 0..w {
            let obase = (u * w + v) * d2;
            let go = &grad_out.data()[obase..obase + d2];
            for (j, &g) in go.iter().enumerate() {
                grads.bias[j] = grads.bias[j] + g;
            }
            for m in 0..k1 {
                let y = u as isize + m as isize - pb1;
                if y < 0 || y >= h as isize {
                    continue;
                }
                for n in 0..k2 {
                    let x = v as isize + n as isize - pb2;
                    if x < 0 || x >= w as isize {
                        continue;
                    }
                    let ibase = (y as usize * w + x as usize) * d1;
                    for i in 0..d1 {
                        let xv = input.data()[ibase + i];
                        let kbase = ((m * k2 + n) * d1 + i) * d2;
                        let mut acc = T::zero();
                        let gk = &mut grads.kernels.data_mut()[kbase..kbase + d2];
                        for j in 0..d2 {
                            let g = go[j];
                            acc = acc + g * kdata[kbase + j];
                            gk[j] = gk[j] + g * xv;
                        }
                        grad_in.data_mut()[ibase + i] = grad_in.data()[ibase + i] + acc;
                    }
                }
            }
        }
    }
    Ok((grad_in, grads))
}
