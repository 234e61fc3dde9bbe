//! Property tests: randomized invariants for the layer zoo and the finite-
//! difference gradient contract (every layer, 20+ seeds, tolerance 1e-4).

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use djpeg_core::gradcheck::check_gradients;
use djpeg_core::layers::*;
use djpeg_core::Tensor;

fn rng_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
}

const LAYER_TOL: f64 = 1e-4;
const SEEDS: u64 = 24;

/// Weighted-sum loss over a layer output turns any layer into a scalar
/// function suitable for finite differences.
fn weights_for(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn conv_gradients_match_finite_differences_across_seeds() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (5, 4);
        let (k, d1, d2) = (
            rng.gen_range(1..=4usize),
            rng.gen_range(1..=3usize),
            rng.gen_range(1..=3usize),
        );
        let input = rng_tensor(&[h, w, d1], &mut rng);
        let kernels = rng_tensor(&[k, k, d1, d2], &mut rng);
        let bias: Vec<f64> = (0..d2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lw = weights_for(h * w * d2, &mut rng);

        // theta = [input, kernels, bias]
        let mut theta: Vec<f64> = input
            .data()
            .iter()
            .chain(kernels.data())
            .chain(&bias)
            .copied()
            .collect();
        let ni = input.len();
        let nk = kernels.len();
        let loss = |t: &[f64]| {
            let x = Tensor::from_vec(&[h, w, d1], t[..ni].to_vec());
            let p = ConvParams::new(
                Tensor::from_vec(&[k, k, d1, d2], t[ni..ni + nk].to_vec()),
                t[ni + nk..].to_vec(),
            );
            conv2d_same(&x, &p)
                .unwrap()
                .data()
                .iter()
                .zip(&lw)
                .map(|(o, w)| o * w)
                .sum()
        };

        let p = ConvParams::new(kernels.clone(), bias.clone());
        let grad_out = Tensor::from_vec(&[h, w, d2], lw.clone());
        let (gi, gk) = conv2d_same_backward(&input, &p, &grad_out).unwrap();
        let analytic: Vec<f64> = gi
            .data()
            .iter()
            .chain(gk.kernels.data())
            .chain(&gk.bias)
            .copied()
            .collect();
        let r = check_gradients(loss, &mut theta, &analytic, LAYER_TOL);
        assert!(r.passed, "seed {seed}: {} at {}", r.max_rel_err, r.worst_index);
    }
}

#[test]
fn batchnorm_gradients_match_finite_differences_across_seeds() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let d = rng.gen_range(1..=4usize);
        let (h, w) = (3, 3);
        let x0 = rng_tensor(&[h, w, d], &mut rng);
        let x1 = rng_tensor(&[h, w, d], &mut rng);
        let gamma: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..1.5)).collect();
        let beta: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let lw = weights_for(2 * h * w * d, &mut rng);
        let n = h * w * d;

        let forward = |t: &[f64]| -> f64 {
            let a = Tensor::from_vec(&[h, w, d], t[..n].to_vec());
            let b = Tensor::from_vec(&[h, w, d], t[n..2 * n].to_vec());
            let mut s = BnState::new(d, 0.999, 0.01);
            s.gamma = t[2 * n..2 * n + d].to_vec();
            s.beta = t[2 * n + d..].to_vec();
            let (out, _) = batchnorm_train(&[a, b], &mut s).unwrap();
            out.iter()
                .flat_map(|o| o.data().iter())
                .zip(&lw)
                .map(|(o, w)| o * w)
                .sum()
        };
        let mut theta: Vec<f64> = x0
            .data()
            .iter()
            .chain(x1.data())
            .chain(&gamma)
            .chain(&beta)
            .copied()
            .collect();

        let mut s = BnState::new(d, 0.999, 0.01);
        s.gamma = gamma.clone();
        s.beta = beta.clone();
        let inputs = [x0.clone(), x1.clone()];
        let (_, cache) = batchnorm_train(&inputs, &mut s.clone()).unwrap();
        let gouts = [
            Tensor::from_vec(&[h, w, d], lw[..n].to_vec()),
            Tensor::from_vec(&[h, w, d], lw[n..].to_vec()),
        ];
        let (gin, gbn) = batchnorm_backward(&inputs, &cache, &s, &gouts);
        let analytic: Vec<f64> = gin[0]
            .data()
            .iter()
            .chain(gin[1].data())
            .chain(&gbn.gamma)
            .chain(&gbn.beta)
            .copied()
            .collect();
        let r = check_gradients(forward, &mut theta, &analytic, LAYER_TOL);
        assert!(r.passed, "seed {seed}: {} at {}", r.max_rel_err, r.worst_index);
    }
}

#[test]
fn fc_gradients_match_finite_differences_across_seeds() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let (m, nout) = (rng.gen_range(2..=6usize), rng.gen_range(2..=5usize));
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let wts: Vec<f64> = (0..m * nout).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..nout).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lw = weights_for(nout, &mut rng);

        let loss = |t: &[f64]| -> f64 {
            let p = FcParams::new(m, nout, t[m..m + m * nout].to_vec(), t[m + m * nout..].to_vec());
            fc_forward(&t[..m], &p)
                .unwrap()
                .iter()
                .zip(&lw)
                .map(|(o, w)| o * w)
                .sum()
        };
        let mut theta: Vec<f64> = x.iter().chain(&wts).chain(&b).copied().collect();
        let p = FcParams::new(m, nout, wts.clone(), b.clone());
        let mut grads = FcGrads::zeros_like(&p);
        let gin = fc_backward(&x, &p, &lw, &mut grads);
        let analytic: Vec<f64> = gin
            .iter()
            .chain(&grads.weights)
            .chain(&grads.bias)
            .copied()
            .collect();
        let r = check_gradients(loss, &mut theta, &analytic, LAYER_TOL);
        assert!(r.passed, "seed {seed}: {} at {}", r.max_rel_err, r.worst_index);
    }
}

#[test]
fn pooling_and_activation_gradients_across_seeds() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let (h, w, d) = (5, 5, 2);
        let input = rng_tensor(&[h, w, d], &mut rng);
        let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
        let lw = weights_for(oh * ow * d, &mut rng);
        let lw_full = weights_for(h * w * d, &mut rng);

        // average pooling
        let loss = |t: &[f64]| -> f64 {
            let x = Tensor::from_vec(&[h, w, d], t.to_vec());
            avgpool_3x3_s2(&x).data().iter().zip(&lw).map(|(o, w)| o * w).sum()
        };
        let mut theta = input.data().to_vec();
        let grad_out = Tensor::from_vec(&[oh, ow, d], lw.clone());
        let analytic = avgpool_3x3_s2_backward(&[h, w, d], &grad_out);
        let r = check_gradients(loss, &mut theta, analytic.data(), LAYER_TOL);
        assert!(r.passed, "avgpool seed {seed}: {}", r.max_rel_err);

        // max pooling (random reals: ties have probability zero)
        let loss = |t: &[f64]| -> f64 {
            let x = Tensor::from_vec(&[h, w, d], t.to_vec());
            maxpool_3x3_s2(&x).0.data().iter().zip(&lw).map(|(o, w)| o * w).sum()
        };
        let mut theta = input.data().to_vec();
        let (_, argmax) = maxpool_3x3_s2(&input);
        let analytic = maxpool_3x3_s2_backward(&[h, w, d], &argmax, &grad_out);
        let r = check_gradients(loss, &mut theta, analytic.data(), LAYER_TOL);
        assert!(r.passed, "maxpool seed {seed}: {}", r.max_rel_err);

        // activations
        let loss = |t: &[f64]| -> f64 {
            let x = Tensor::from_vec(&[h, w, d], t.to_vec());
            tanh_forward(&x).data().iter().zip(&lw_full).map(|(o, w)| o * w).sum()
        };
        let mut theta = input.data().to_vec();
        let grad_full = Tensor::from_vec(&[h, w, d], lw_full.clone());
        let analytic = tanh_backward(&tanh_forward(&input), &grad_full);
        let r = check_gradients(loss, &mut theta, analytic.data(), LAYER_TOL);
        assert!(r.passed, "tanh seed {seed}: {}", r.max_rel_err);

        let loss = |t: &[f64]| -> f64 {
            let x = Tensor::from_vec(&[h, w, d], t.to_vec());
            abs_forward(&x).data().iter().zip(&lw_full).map(|(o, w)| o * w).sum()
        };
        let mut theta = input.data().to_vec();
        let analytic = abs_backward(&input, &grad_full);
        let r = check_gradients(loss, &mut theta, analytic.data(), LAYER_TOL);
        assert!(r.passed, "abs seed {seed}: {}", r.max_rel_err);

        let loss = |t: &[f64]| -> f64 {
            let x = Tensor::from_vec(&[h, w, d], t.to_vec());
            relu_forward(&x).data().iter().zip(&lw_full).map(|(o, w)| o * w).sum()
        };
        let mut theta = input.data().to_vec();
        let analytic = relu_backward(&input, &grad_full);
        let r = check_gradients(loss, &mut theta, analytic.data(), LAYER_TOL);
        assert!(r.passed, "relu seed {seed}: {}", r.max_rel_err);
    }
}

proptest! {
    #[test]
    fn conv_same_output_shape(
        h in 1usize..12, w in 1usize..12,
        k in 1usize..=4, d1 in 1usize..=3, d2 in 1usize..=3,
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = rng_tensor(&[h, w, d1], &mut rng);
        let kernels = rng_tensor(&[k, k, d1, d2], &mut rng);
        let bias: Vec<f64> = vec![0.0; d2];
        let out = conv2d_same(&input, &ConvParams::new(kernels, bias)).unwrap();
        prop_assert_eq!(out.shape(), &[h, w, d2]);
    }

    #[test]
    fn softmax_is_probability_vector(
        logits in proptest::collection::vec(-60.0f64..60.0, 2..8)
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v) && v.is_finite()));
    }

    #[test]
    fn batchnorm_standardizes_each_channel(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w, d) = (4, 4, 3);
        let batch: Vec<Tensor<f64>> =
            (0..3).map(|_| rng_tensor(&[h, w, d], &mut rng)).collect();
        let mut s = BnState::new(d, 0.999, 0.01);
        let (out, _) = batchnorm_train(&batch, &mut s).unwrap();
        for c in 0..d {
            let vals: Vec<f64> = out
                .iter()
                .flat_map(|t| t.data().iter().skip(c).step_by(d).copied())
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9, "channel {} mean {}", c, mean);
            // gamma=1: output variance is v/(v+xi) of the input variance
            prop_assert!(var < 1.0 + 1e-9, "channel {} var {}", c, var);
        }
    }

    #[test]
    fn avgpool_preserves_constants(v in -10.0f64..10.0, h in 1usize..10, w in 1usize..10) {
        let input = Tensor::full(&[h, w, 2], v);
        let out = avgpool_3x3_s2(&input);
        prop_assert!(out.data().iter().all(|&o| (o - v).abs() < 1e-12));
    }

    #[test]
    fn abs_layer_is_sign_invariant(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rng_tensor(&[4, 4, 2], &mut rng);
        let neg = x.map(|v| -v);
        let a = abs_forward(&x);
        let b = abs_forward(&neg);
        prop_assert_eq!(a.data(), b.data());
    }

    #[test]
    fn activations_respect_ranges(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rng_tensor(&[4, 4, 2], &mut rng);
        prop_assert!(tanh_forward(&x).data().iter().all(|&v| (-1.0..=1.0).contains(&v)));
        prop_assert!(relu_forward(&x).data().iter().all(|&v| v >= 0.0));
        prop_assert!(abs_forward(&x).data().iter().all(|&v| v >= 0.0));
    }
}
