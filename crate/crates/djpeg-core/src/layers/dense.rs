//! Fully connected layer, softmax, and cross-entropy loss.

use crate::tensor::{Scalar, TensorError};

/// Weights stored row-major as [M_in, N_out].
#[derive(Debug, Clone, PartialEq)]
pub struct FcParams<T: Scalar> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub m_in: usize,
    pub n_out: usize,
}

impl<T: Scalar> FcParams<T> {
    pub fn new(m_in: usize, n_out: usize, weights: Vec<T>, bias: Vec<T>) -> Self {
        assert_eq!(weights.len(), m_in * n_out);
        assert_eq!(bias.len(), n_out);
        FcParams {
            weights,
            bias,
            m_in,
            n_out,
        }
    }

    pub fn zeros(m_in: usize, n_out: usize) -> Self {
        FcParams {
            weights: vec![T::zero(); m_in * n_out],
            bias: vec![T::zero(); n_out],
            m_in,
            n_out,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FcGrads<T: Scalar> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> FcGrads<T> {
    pub fn zeros_like(p: &FcParams<T>) -> Self {
        FcGrads {
            weights: vec![T::zero(); p.weights.len()],
            bias: vec![T::zero(); p.bias.len()],
        }
    }
}

/// a_n = sum_m a_m w_{m,n} + b_n. Activation is applied by the caller.
pub fn fc_forward<T: Scalar>(input: &[T], p: &FcParams<T>) -> Result<Vec<T>, TensorError> {
    if input.len() != p.m_in {
        return Err(TensorError::ShapeMismatch(format!(
            "fc: input length {} does not match weights [{}, {}]",
            input.len(),
            p.m_in,
            p.n_out
        )));
    }
    let mut out = p.bias.clone();
    for (m, &x) in input.iter().enumerate() {
        let row = &p.weights[m * p.n_out..(m + 1) * p.n_out];
        for (o, &w) in out.iter_mut().zip(row) {
            *o = *o + x * w;
        }
    }
    Ok(out)
}

/// Accumulates weight/bias gradients into `grads` and returns the input
/// gradient.
pub fn fc_backward<T: Scalar>(
    input: &[T],
    p: &FcParams<T>,
    grad_out: &[T],
    grads: &mut FcGrads<T>,
) -> Vec<T> {
    debug_assert_eq!(grad_out.len(), p.n_out);
    let mut grad_in = vec![T::zero(); p.m_in];
    for (m, &x) in input.iter().enumerate() {
        let row = &p.weights[m * p.n_out..(m + 1) * p.n_out];
        let grow = &mut grads.weights[m * p.n_out..(m + 1) * p.n_out];
        let mut acc = T::zero();
        for n in 0..p.n_out {
            acc = acc + grad_out[n] * row[n];
            grow[n] = grow[n] + grad_out[n] * x;
        }
        grad_in[m] = acc;
    }
    for (gb, &g) in grads.bias.iter_mut().zip(grad_out) {
        *gb = *gb + g;
    }
    grad_in
}

/// Softmax with max-subtraction for stability.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .cloned()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn is_one_hot<T: Scalar>(q: &[T]) -> bool {
    let mut ones = 0;
    for &v in q {
        if v == T::one() {
            ones += 1;
        } else if v != T::zero() {
            return false;
        }
    }
    ones == 1
}

/// Cross-entropy against a one-hot target, log clamped at p >= 1e-12.
pub fn cross_entropy<T: Scalar>(p: &[T], q: &[T]) -> Result<T, TensorError> {
    if p.len() != q.len() {
        return Err(TensorError::ShapeMismatch(
            "cross_entropy: length mismatch".into(),
        ));
    }
    if !is_one_hot(q) {
        return Err(TensorError::ShapeMismatch(
            "cross_entropy: target is not one-hot".into(),
        ));
    }
    let floor = T::from_f64(1e-12).unwrap();
    let mut loss = T::zero();
    for (&pi, &qi) in p.iter().zip(q) {
        if qi == T::one() {
            let clamped = if pi > floor { pi } else { floor };
            loss = loss - clamped.ln();
        }
    }
    Ok(loss)
}

/// Gradient of softmax followed by cross-entropy, w.r.t. the logits: p - q.
pub fn softmax_xent_grad<T: Scalar>(probs: &[T], q: &[T]) -> Vec<T> {
    probs.iter().zip(q).map(|(&p, &t)| p - t).collect()
}

/// w <- w - alpha * grad, element-wise over matching buffers.
pub fn sgd_update<T: Scalar>(params: &mut [T], grads: &[T], alpha: T) -> Result<(), TensorError> {
    if params.len() != grads.len() {
        return Err(TensorError::ShapeMismatch(format!(
            "sgd_update: {} params vs {} grads",
            params.len(),
            grads.len()
        )));
    }
    for (p, &g) in params.iter_mut().zip(grads) {
        *p = *p - alpha * g;
    }
    Ok(())
}
