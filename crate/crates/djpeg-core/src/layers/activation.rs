//! Element-wise activations: TanH, ReLU, and the ABS layer.

use crate::tensor::{Scalar, Tensor};

pub fn tanh_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.tanh())
}

/// Gradient given the forward *output* y: (1 - y^2) * upstream.
pub fn tanh_backward<T: Scalar>(y: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = grad_out.clone();
    for (gv, &yv) in g.data_mut().iter_mut().zip(y.data()) {
        *gv = *gv * (T::one() - yv * yv);
    }
    g
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Subgradient at 0 is 0.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = grad_out.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        if xv <= T::zero() {
            *gv = T::zero();
        }
    }
    g
}

pub fn abs_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.abs())
}

/// Gradient is sign(x) * upstream, with sign(0) = 0.
pub fn abs_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = grad_out.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        if xv < T::zero() {
            *gv = -*gv;
        } else if xv == T::zero() {
            *gv = T::zero();
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_values() {
        let x = Tensor::from_vec(&[3], vec![0.0f64, 1.0, 1000.0]);
        let y = tanh_forward(&x);
        assert_eq!(y.data()[0], 0.0);
        // reference value of tanh(1) evaluated independently
        assert!((y.data()[1] - 0.7615941559557649).abs() < 1e-15);
        assert_eq!(y.data()[2], 1.0); // saturates without overflow
        assert!(y.all_finite());
    }

    #[test]
    fn tanh_output_in_open_interval() {
        for i in -50..=50 {
            let v = (i as f64) * 0.7;
            let y = v.tanh();
            assert!((-1.0..=1.0).contains(&y));
            if v.abs() < 18.0 {
                // strictly inside until f64 saturation
                assert!(y.abs() < 1.0);
            }
        }
    }

    #[test]
    fn relu_values_and_mask() {
        let x = Tensor::from_vec(&[3], vec![-3.0f64, 0.0, 5.0]);
        let y = relu_forward(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 5.0]);
        let g = relu_backward(&x, &Tensor::full(&[3], 2.0));
        assert_eq!(g.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn abs_values_and_gradient() {
        let x = Tensor::from_vec(&[3], vec![-7.0f64, 0.0, 2.0]);
        let y = abs_forward(&x);
        assert_eq!(y.data(), &[7.0, 0.0, 2.0]);
        assert_eq!(abs_forward(&y).data(), y.data()); // idempotent
        let g = abs_backward(&x, &Tensor::full(&[3], 1.0));
        assert_eq!(g.data(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn activation_gradients_match_finite_differences() {
        let xs = [-1.3f64, -0.4, 0.2, 0.9, 2.1];
        let h = 1e-5;
        for &x0 in &xs {
            let x = Tensor::from_vec(&[1], vec![x0]);
            let up = Tensor::from_vec(&[1], vec![1.0]);

            let y = tanh_forward(&x);
            let g = tanh_backward(&y, &up).data()[0];
            let fd = ((x0 + h).tanh() - (x0 - h).tanh()) / (2.0 * h);
            assert!((g - fd).abs() < 1e-8);

            let g = relu_backward(&x, &up).data()[0];
            let fd = ((x0 + h).max(0.0) - (x0 - h).max(0.0)) / (2.0 * h);
            assert!((g - fd).abs() < 1e-8);

            let g = abs_backward(&x, &up).data()[0];
            let fd = ((x0 + h).abs() - (x0 - h).abs()) / (2.0 * h);
            assert!((g - fd).abs() < 1e-8);
        }
    }
}
