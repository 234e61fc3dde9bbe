//! Batch normalization over the channel (last) axis of [H, W, D] feature maps.
//!
//! Train mode normalizes with the current mini-batch statistics and updates
//! the moving averages; infer mode normalizes with the stored moving
//! statistics and leaves state untouched.

use crate::tensor::{Scalar, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq)]
pub struct BnState<T: Scalar> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub moving_mean: Vec<T>,
    pub moving_var: Vec<T>,
    /// Momentum of the moving averages.
    pub tau: T,
    /// Variance floor constant.
    pub xi: T,
    /// Number of training batches folded into the moving statistics. The
    /// first batch seeds them directly; later batches blend with `tau`.
    pub batches_seen: u64,
}

impl<T: Scalar> BnState<T> {
    pub fn new(channels: usize, tau: T, xi: T) -> Self {
        assert!(xi > T::zero(), "xi must be positive");
        BnState {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            moving_mean: vec![T::zero(); channels],
            moving_var: vec![T::one(); channels],
            tau,
            xi,
            batches_seen: 0,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Debug, Clone)]
pub struct BnGrads<T: Scalar> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

/// Per-channel batch statistics retained for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T: Scalar> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub inv_std: Vec<T>,
}

fn check_batch<T: Scalar>(batch: &[Tensor<T>], channels: usize) -> Result<(), TensorError> {
    for t in batch {
        let s = t.shape();
        if s.len() != 3 || s[2] != channels {
            return Err(TensorError::ShapeMismatch(format!(
                "batchnorm: sample shape {s:?} incompatible with {channels} channels"
            )));
        }
    }
    Ok(())
}

/// Train-mode forward: normalize by mini-batch statistics, update the moving
/// averages in `s`, and return the cache needed for the backward pass.
pub fn batchnorm_train<T: Scalar>(
    batch: &[Tensor<T>],
    s: &mut BnState<T>,
) -> Result<(Vec<Tensor<T>>, BnCache<T>), TensorError> {
    if batch.len() < 2 {
        return Err(TensorError::ShapeMismatch(
            "batchnorm train mode requires a batch of at least 2 samples".into(),
        ));
    }
    let d = s.channels();
    check_batch(batch, d)?;
    let per_sample = batch[0].len() / d;
    let n = T::from_usize(batch.len() * per_sample).unwrap();

    let mut mean = vec![T::zero(); d];
    for t in batch {
        for chunk in t.data().chunks_exact(d) {
            for (m, &x) in mean.iter_mut().zip(chunk) {
                *m = *m + x;
            }
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }

    let mut var = vec![T::zero(); d];
    for t in batch {
        for chunk in t.data().chunks_exact(d) {
            for j in 0..d {
                let diff = chunk[j] - mean[j];
                var[j] = var[j] + diff * diff;
            }
        }
    }
    for v in &mut var {
        *v = *v / n;
    }

    let inv_std: Vec<T> = var.iter().map(|&v| (v + s.xi).sqrt().recip()).collect();

    let out: Vec<Tensor<T>> = batch
        .iter()
        .map(|t| {
            let mut o = t.clone();
            for chunk in o.data_mut().chunks_exact_mut(d) {
                for j in 0..d {
                    chunk[j] = s.gamma[j] * (chunk[j] - mean[j]) * inv_std[j] + s.beta[j];
                }
            }
            o
        })
        .collect();

    if s.batches_seen == 0 {
        s.moving_mean.copy_from_slice(&mean);
        s.moving_var.copy_from_slice(&var);
    } else {
        let one = T::one();
        for j in 0..d {
            s.moving_mean[j] = s.tau * s.moving_mean[j] + (one - s.tau) * mean[j];
            s.moving_var[j] = s.tau * s.moving_var[j] + (one - s.tau) * var[j];
        }
    }
    s.batches_seen += 1;

    Ok((out, BnCache { mean, var, inv_std }))
}

/// Infer-mode forward: normalize by the stored moving statistics.
pub fn batchnorm_infer<T: Scalar>(
    input: &Tensor<T>,
    s: &BnState<T>,
) -> Result<Tensor<T>, TensorError> {
    let d = s.channels();
    check_batch(std::slice::from_ref(input), d)?;
    let inv_std: Vec<T> = s
        .moving_var
        .iter()
        .map(|&v| (v + s.xi).sqrt().recip())
        .collect();
    let mut o = input.clone();
    for chunk in o.data_mut().chunks_exact_mut(d) {
        for j in 0..d {
            chunk[j] = s.gamma[j] * (chunk[j] - s.moving_mean[j]) * inv_std[j] + s.beta[j];
        }
    }
    Ok(o)
}

/// Backward through the train-mode normalization (gradient flows through the
/// batch statistics).
pub fn batchnorm_backward<T: Scalar>(
    inputs: &[Tensor<T>],
    cache: &BnCache<T>,
    s: &BnState<T>,
    grad_out: &[Tensor<T>],
) -> (Vec<Tensor<T>>, BnGrads<T>) {
    let d = s.channels();
    let per_sample = inputs[0].len() / d;
    let n = T::from_usize(inputs.len() * per_sample).unwrap();

    let mut grad_gamma = vec![T::zero(); d];
    let mut grad_beta = vec![T::zero(); d];
    // sums needed for the input gradient
    let mut sum_dy = vec![T::zero(); d];
    let mut sum_dy_xhat = vec![T::zero(); d];

    for (t, g) in inputs.iter().zip(grad_out) {
        for (xc, gc) in t.data().chunks_exact(d).zip(g.data().chunks_exact(d)) {
            for j in 0..d {
                let xhat = (xc[j] - cache.mean[j]) * cache.inv_std[j];
                grad_gamma[j] = grad_gamma[j] + gc[j] * xhat;
                grad_beta[j] = grad_beta[j] + gc[j];
                sum_dy[j] = sum_dy[j] + gc[j];
                sum_dy_xhat[j] = sum_dy_xhat[j] + gc[j] * xhat;
            }
        }
    }

    // dx = gamma * inv_std / N * (N*dy - sum(dy) - xhat * sum(dy*xhat))
    let grad_in: Vec<Tensor<T>> = inputs
        .iter()
        .zip(grad_out)
        .map(|(t, g)| {
            let mut o = t.clone();
            for (oc, gc) in o.data_mut().chunks_exact_mut(d).zip(g.data().chunks_exact(d)) {
                for j in 0..d {
                    let xhat = (oc[j] - cache.mean[j]) * cache.inv_std[j];
                    oc[j] = s.gamma[j] * cache.inv_std[j] / n
                        * (n * gc[j] - sum_dy[j] - xhat * sum_dy_xhat[j]);
                }
            }
            o
        })
        .collect();

    (
        grad_in,
        BnGrads {
            gamma: grad_gamma,
            beta: grad_beta,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_on_standardized_channel() {
        // channel already zero-mean unit-variance: output is input scaled by
        // (1+xi)^(-1/2)
        let xi = 0.01;
        let mut s = BnState::new(1, 0.999, xi);
        let a = Tensor::from_vec(&[1, 2, 1], vec![1.0, -1.0]);
        let b = Tensor::from_vec(&[1, 2, 1], vec![1.0, -1.0]);
        let (out, _) = batchnorm_train(&[a, b], &mut s).unwrap();
        let scale = (1.0f64 + xi).sqrt().recip();
        for t in &out {
            assert!((t.data()[0] - scale).abs() < 1e-12);
            assert!((t.data()[1] + scale).abs() < 1e-12);
        }
    }

    #[test]
    fn moving_average_update_arithmetic() {
        // moving mean 0, batch mean 10, tau 0.999 -> 0.01
        let mut s = BnState::new(1, 0.999, 0.01);
        s.batches_seen = 1; // past the seeding batch
        let a = Tensor::from_vec(&[1, 1, 1], vec![10.0f64]);
        let b = Tensor::from_vec(&[1, 1, 1], vec![10.0]);
        batchnorm_train(&[a, b], &mut s).unwrap();
        assert!((s.moving_mean[0] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn first_batch_seeds_moving_stats() {
        let mut s = BnState::new(1, 0.999, 0.01);
        let a = Tensor::from_vec(&[1, 1, 1], vec![4.0f64]);
        let b = Tensor::from_vec(&[1, 1, 1], vec![6.0]);
        batchnorm_train(&[a, b], &mut s).unwrap();
        assert!((s.moving_mean[0] - 5.0).abs() < 1e-12);
        assert!((s.moving_var[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_batch_outputs_beta() {
        let mut s = BnState::new(1, 0.999, 0.01);
        s.beta = vec![3.5];
        let a = Tensor::full(&[2, 2, 1], 7.0f64);
        let b = Tensor::full(&[2, 2, 1], 7.0);
        let (out, _) = batchnorm_train(&[a, b], &mut s).unwrap();
        for t in &out {
            for &v in t.data() {
                assert!((v - 3.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_sample_train_rejected() {
        let mut s = BnState::new(1, 0.999, 0.01);
        let a = Tensor::full(&[2, 2, 1], 1.0f64);
        assert!(batchnorm_train(&[a], &mut s).is_err());
    }

    #[test]
    fn infer_mode_leaves_state_unchanged() {
        let mut s = BnState::new(2, 0.999, 0.01);
        s.moving_mean = vec![1.0, -1.0];
        s.moving_var = vec![4.0, 0.25];
        let before = s.clone();
        let x = Tensor::from_vec(&[1, 1, 2], vec![3.0f64, 0.0]);
        let y = batchnorm_infer(&x, &s).unwrap();
        assert_eq!(s, before);
        let e0 = (3.0 - 1.0) / (4.0f64 + 0.01).sqrt();
        assert!((y.data()[0] - e0).abs() < 1e-12);
    }

    #[test]
    fn train_output_is_standardized() {
        // gamma=1, beta=0: per-channel batch mean ~0 and variance ~ 1/(1+xi/v)
        let xi = 0.01;
        let mut s = BnState::new(2, 0.999, xi);
        let vals: Vec<f64> = (0..32).map(|i| (i as f64 * 0.73).sin() * 3.0 + 1.0).collect();
        let batch: Vec<Tensor<f64>> = vals
            .chunks(8)
            .map(|c| Tensor::from_vec(&[2, 2, 2], c.to_vec()))
            .collect();
        let (out, cache) = batchnorm_train(&batch, &mut s).unwrap();
        for j in 0..2 {
            let mut mean = 0.0;
            let mut var = 0.0;
            let n = (out.len() * 4) as f64;
            for t in &out {
                for chunk in t.data().chunks_exact(2) {
                    mean += chunk[j];
                }
            }
            mean /= n;
            for t in &out {
                for chunk in t.data().chunks_exact(2) {
                    var += (chunk[j] - mean) * (chunk[j] - mean);
                }
            }
            var /= n;
            assert!(mean.abs() < 1e-5);
            let expected_var = cache.var[j] / (cache.var[j] + xi);
            assert!((var - expected_var).abs() < 1e-3);
        }
    }
}
