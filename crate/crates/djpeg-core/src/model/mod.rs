//! Multi-branch CNN over quantized DCT sub-bands.
//!
//! The classifier reads the 20 lowest-frequency AC sub-bands of a JPEG tile.
//! Twenty branches each see one sub-band (32x32x1); a twenty-first sees all
//! of them at once (32x32x20) and models cross-band structure. Every branch
//! is a short stack of conv -> batch-norm -> activation -> pool blocks whose
//! outputs are concatenated and fed to two fully connected layers ending in
//! a two-way softmax (single vs. double compression).

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use train::{evaluate, learning_rate, pairs_to_samples, train, EpochStats, Metrics, TrainOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dctinput::{slice_branch_input, SUBBANDS};
use crate::layers::{
    abs_backward, abs_forward, avgpool_3x3_s2, avgpool_3x3_s2_backward, batchnorm_backward,
    batchnorm_infer, batchnorm_train, conv2d_same, conv2d_same_backward, fc_backward, fc_forward,
    maxpool_3x3_s2, maxpool_3x3_s2_backward, relu_backward, relu_forward, sgd_update, softmax,
    softmax_xent_grad, tanh_backward, tanh_forward, BnCache, BnGrads, BnState, ConvGrads,
    ConvParams, FcGrads, FcParams,
};
use crate::tensor::{Scalar, Tensor, TensorError};

pub const CLASS_SINGLE: usize = 0;
pub const CLASS_DOUBLE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Avg,
    Max,
}

/// Architecture switches. The defaults are the full model; each switch is an
/// ablation knob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Keep the 20 single-sub-band branches (false: only the joint branch).
    pub use_intra_branches: bool,
    /// Take |x| of every branch input before the first convolution.
    pub use_abs: bool,
    pub use_bn: bool,
    pub activation: Activation,
    pub pooling: Pooling,
    pub fc1_units: usize,
    /// Spatial grid of the sub-band tensor (blocks high, blocks wide).
    pub input_grid: (usize, usize),
    pub subbands: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            use_intra_branches: true,
            use_abs: true,
            use_bn: true,
            activation: Activation::Tanh,
            pooling: Pooling::Avg,
            fc1_units: 512,
            input_grid: (32, 32),
            subbands: SUBBANDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per batch; half singles, half their paired doubles.
    pub batch_size: usize,
    pub lr0: f64,
    /// Multiply the rate by `lr_keep` once per this many epochs.
    pub lr_step_epochs: usize,
    pub lr_keep: f64,
    /// Moving-average memory and variance floor for batch norm.
    pub bn_tau: f64,
    pub bn_xi: f64,
    /// Std-dev of the Gaussian conv kernel init.
    pub conv_init_std: f64,
    /// First epoch (1-based) at which the validation set is scored.
    pub validate_from_epoch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 80,
            batch_size: 50,
            lr0: 0.05,
            lr_step_epochs: 20,
            lr_keep: 0.3,
            bn_tau: 0.999,
            bn_xi: 0.01,
            conv_init_std: 0.1,
            validate_from_epoch: 41,
            seed: 1,
        }
    }
}

/// One conv -> (bn) -> activation -> (pool) block.
#[derive(Debug, Clone)]
pub struct ConvBlock<T: Scalar> {
    pub conv: ConvParams<T>,
    pub bn: Option<BnState<T>>,
    pub pool: bool,
}

#[derive(Debug, Clone)]
pub struct Branch<T: Scalar> {
    /// 1..=20 for single-sub-band branches, 21 for the joint branch.
    pub index: usize,
    pub blocks: Vec<ConvBlock<T>>,
}

#[derive(Debug, Clone)]
pub struct ModelParams<T: Scalar> {
    pub cfg: NetworkConfig,
    pub branches: Vec<Branch<T>>,
    pub fc1: FcParams<T>,
    pub fc2: FcParams<T>,
}

/// (kernel size, in channels, out channels, pooled) per block of branch `k`.
pub fn branch_spec(cfg: &NetworkConfig, k: usize) -> Vec<(usize, usize, usize, bool)> {
    if k == 21 {
        vec![
            (1, cfg.subbands, 2, false),
            (3, 2, 4, true),
            (2, 4, 4, true),
            (4, 4, 4, true),
        ]
    } else {
        vec![(3, 1, 2, true), (2, 2, 4, true), (4, 4, 4, true)]
    }
}

pub fn branch_indices(cfg: &NetworkConfig) -> Vec<usize> {
    if cfg.use_intra_branches {
        (1..=21).collect()
    } else {
        vec![21]
    }
}

/// Flattened feature length after concatenating all branch outputs.
pub fn feature_len(cfg: &NetworkConfig) -> usize {
    branch_indices(cfg)
        .iter()
        .map(|&k| {
            let (mut h, mut w) = cfg.input_grid;
            let mut out_c = 0;
            for (_, _, d2, pool) in branch_spec(cfg, k) {
                out_c = d2;
                if pool {
                    h = h.div_ceil(2);
                    w = w.div_ceil(2);
                }
            }
            h * w * out_c
        })
        .sum()
}

/// Initialize a fresh network: conv kernels Gaussian(0, conv_init_std),
/// conv biases uniform [0,1), fully connected layers variance-scaled
/// uniform with zero bias. Sampling is done in real64 and cast, so the same
/// seed produces the same network at either precision.
pub fn build_network<T: Scalar>(cfg: &NetworkConfig, tc: &TrainConfig) -> ModelParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let normal = Normal::new(0.0f64, tc.conv_init_std).unwrap();
    let tau = T::from_f64(tc.bn_tau).unwrap();
    let xi = T::from_f64(tc.bn_xi).unwrap();

    let branches = branch_indices(cfg)
        .into_iter()
        .map(|k| {
            let blocks = branch_spec(cfg, k)
                .into_iter()
                .map(|(ks, d1, d2, pool)| {
                    let n = ks * ks * d1 * d2;
                    let kernels = Tensor::from_vec(
                        &[ks, ks, d1, d2],
                        (0..n)
                            .map(|_| T::from_f64(normal.sample(&mut rng)).unwrap())
                            .collect(),
                    );
                    let bias = (0..d2)
                        .map(|_| T::from_f64(rng.gen_range(0.0..1.0)).unwrap())
                        .collect();
                    ConvBlock {
                        conv: ConvParams::new(kernels, bias),
                        bn: cfg.use_bn.then(|| BnState::new(d2, tau, xi)),
                        pool,
                    }
                })
                .collect();
            Branch { index: k, blocks }
        })
        .collect();

    let mut xavier = |m: usize, n: usize| -> FcParams<T> {
        let limit = (6.0 / (m + n) as f64).sqrt();
        let weights = (0..m * n)
            .map(|_| T::from_f64(rng.gen_range(-limit..limit)).unwrap())
            .collect();
        FcParams::new(m, n, weights, vec![T::zero(); n])
    };
    let fc1 = xavier(feature_len(cfg), cfg.fc1_units);
    let fc2 = xavier(cfg.fc1_units, 2);

    ModelParams {
        cfg: cfg.clone(),
        branches,
        fc1,
        fc2,
    }
}

// ---------------------------------------------------------------------------
// Forward / backward

#[derive(Debug)]
pub struct BlockCache<T: Scalar> {
    /// Convolution output, pre-normalization (batch-norm backward input).
    conv_out: Vec<Tensor<T>>,
    bn_cache: Option<BnCache<T>>,
    /// Pre-activation values; only kept when the activation needs them.
    pre_act: Option<Vec<Tensor<T>>>,
    /// Post-activation, pre-pool.
    act_out: Vec<Tensor<T>>,
    /// Block output (pooled when `pool` is set); next block's input.
    out: Vec<Tensor<T>>,
    argmax: Option<Vec<Vec<usize>>>,
}

#[derive(Debug)]
pub struct BranchCache<T: Scalar> {
    /// Branch input before the ABS layer.
    raw: Vec<Tensor<T>>,
    /// What the first convolution actually saw.
    fed: Vec<Tensor<T>>,
    blocks: Vec<BlockCache<T>>,
}

#[derive(Debug)]
pub struct ForwardCache<T: Scalar> {
    branches: Vec<BranchCache<T>>,
    features: Vec<Vec<T>>,
    fc1_lin: Vec<Vec<T>>,
    fc1_act: Vec<Vec<T>>,
    pub probs: Vec<Vec<T>>,
}

fn activate<T: Scalar>(cfg: &NetworkConfig, x: &Tensor<T>) -> Tensor<T> {
    match cfg.activation {
        Activation::Tanh => tanh_forward(x),
        Activation::Relu => relu_forward(x),
    }
}

fn branch_forward_train<T: Scalar>(
    cfg: &NetworkConfig,
    branch: &mut Branch<T>,
    batch: &[Tensor<T>],
) -> Result<BranchCache<T>, TensorError> {
    let raw: Vec<Tensor<T>> = batch
        .iter()
        .map(|t| slice_branch_input(t, branch.index))
        .collect::<Result<_, _>>()?;
    let fed: Vec<Tensor<T>> = if cfg.use_abs {
        raw.iter().map(abs_forward).collect()
    } else {
        raw.clone()
    };

    let mut blocks = Vec::with_capacity(branch.blocks.len());
    let mut cur = fed.clone();
    for block in &mut branch.blocks {
        let conv_out: Vec<Tensor<T>> = cur
            .iter()
            .map(|x| conv2d_same(x, &block.conv))
            .collect::<Result<_, _>>()?;
        let (normed, bn_cache) = match &mut block.bn {
            Some(state) => {
                let (o, c) = batchnorm_train(&conv_out, state)?;
                (o, Some(c))
            }
            None => (conv_out.clone(), None),
        };
        let act_out: Vec<Tensor<T>> = normed.iter().map(|x| activate(cfg, x)).collect();
        let pre_act = matches!(cfg.activation, Activation::Relu).then_some(normed);
        let (out, argmax) = if block.pool {
            match cfg.pooling {
                Pooling::Avg => (act_out.iter().map(avgpool_3x3_s2).collect(), None),
                Pooling::Max => {
                    let pairs: Vec<_> = act_out.iter().map(maxpool_3x3_s2).collect();
                    let (o, a) = pairs.into_iter().unzip();
                    (o, Some(a))
                }
            }
        } else {
            (act_out.clone(), None)
        };
        cur = out.clone();
        blocks.push(BlockCache {
            conv_out,
            bn_cache,
            pre_act,
            act_out,
            out,
            argmax,
        });
    }
    Ok(BranchCache { raw, fed, blocks })
}

/// Train-mode forward over a batch of full sub-band tensors. Updates the
/// batch-norm moving statistics in `params`.
pub fn forward_train<T: Scalar>(
    params: &mut ModelParams<T>,
    batch: &[Tensor<T>],
) -> Result<ForwardCache<T>, TensorError> {
    let cfg = params.cfg.clone();
    let mut branches = Vec::with_capacity(params.branches.len());
    for branch in &mut params.branches {
        branches.push(branch_forward_train(&cfg, branch, batch)?);
    }

    let flen = feature_len(&cfg);
    let mut features = vec![Vec::with_capacity(flen); batch.len()];
    for bc in &branches {
        let last = bc.blocks.last().unwrap();
        for (f, t) in features.iter_mut().zip(&last.out) {
            f.extend_from_slice(t.data());
        }
    }

    let mut fc1_lin = Vec::with_capacity(batch.len());
    let mut fc1_act = Vec::with_capacity(batch.len());
    let mut probs = Vec::with_capacity(batch.len());
    for f in &features {
        let lin = fc_forward(f, &params.fc1)?;
        let act: Vec<T> = match cfg.activation {
            Activation::Tanh => lin.iter().map(|&v| v.tanh()).collect(),
            Activation::Relu => lin.iter().map(|&v| v.max(T::zero())).collect(),
        };
        let logits = fc_forward(&act, &params.fc2)?;
        probs.push(softmax(&logits));
        fc1_lin.push(lin);
        fc1_act.push(act);
    }

    Ok(ForwardCache {
        branches,
        features,
        fc1_lin,
        fc1_act,
        probs,
    })
}

/// Inference forward for one sample; batch norm uses its moving statistics.
pub fn forward_infer<T: Scalar>(
    params: &ModelParams<T>,
    sample: &Tensor<T>,
) -> Result<Vec<T>, TensorError> {
    let cfg = &params.cfg;
    let mut feats: Vec<T> = Vec::with_capacity(feature_len(cfg));
    for branch in &params.branches {
        let mut cur = slice_branch_input(sample, branch.index)?;
        if cfg.use_abs {
            cur = abs_forward(&cur);
        }
        for block in &branch.blocks {
            let mut x = conv2d_same(&cur, &block.conv)?;
            if let Some(state) = &block.bn {
                x = batchnorm_infer(&x, state)?;
            }
            x = activate(cfg, &x);
            cur = if block.pool {
                match cfg.pooling {
                    Pooling::Avg => avgpool_3x3_s2(&x),
                    Pooling::Max => maxpool_3x3_s2(&x).0,
                }
            } else {
                x
            };
        }
        feats.extend_from_slice(cur.data());
    }
    let lin = fc_forward(&feats, &params.fc1)?;
    let act: Vec<T> = match cfg.activation {
        Activation::Tanh => lin.iter().map(|&v| v.tanh()).collect(),
        Activation::Relu => lin.iter().map(|&v| v.max(T::zero())).collect(),
    };
    Ok(softmax(&fc_forward(&act, &params.fc2)?))
}

#[derive(Debug)]
pub struct BlockGrads<T: Scalar> {
    pub conv: ConvGrads<T>,
    pub bn: Option<BnGrads<T>>,
}

#[derive(Debug)]
pub struct GradTape<T: Scalar> {
    pub branches: Vec<Vec<BlockGrads<T>>>,
    pub fc1: FcGrads<T>,
    pub fc2: FcGrads<T>,
}

fn one_hot<T: Scalar>(label: usize) -> Vec<T> {
    let mut q = vec![T::zero(); 2];
    q[label] = T::one();
    q
}

/// Mean cross-entropy of a forward cache against labels.
pub fn batch_loss<T: Scalar>(cache: &ForwardCache<T>, labels: &[usize]) -> Result<T, TensorError> {
    let mut total = T::zero();
    for (p, &l) in cache.probs.iter().zip(labels) {
        total = total + crate::layers::cross_entropy(p, &one_hot(l))?;
    }
    Ok(total / T::from_usize(labels.len()).unwrap())
}

/// Backward pass for the mean cross-entropy loss over the batch.
pub fn backward<T: Scalar>(
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    labels: &[usize],
) -> Result<GradTape<T>, TensorError> {
    let cfg = &params.cfg;
    let b = labels.len();
    if cache.probs.len() != b {
        return Err(TensorError::ShapeMismatch(format!(
            "backward: {} cached samples vs {b} labels",
            cache.probs.len()
        )));
    }
    let inv_b = T::from_usize(b).unwrap().recip();

    let mut fc1_grads = FcGrads::zeros_like(&params.fc1);
    let mut fc2_grads = FcGrads::zeros_like(&params.fc2);
    // d(mean loss)/d(features), per sample
    let mut dfeatures = Vec::with_capacity(b);
    for i in 0..b {
        let mut dlogits = softmax_xent_grad(&cache.probs[i], &one_hot(labels[i]));
        for g in &mut dlogits {
            *g = *g * inv_b;
        }
        let dact = fc_backward(&cache.fc1_act[i], &params.fc2, &dlogits, &mut fc2_grads);
        let dlin: Vec<T> = match cfg.activation {
            Activation::Tanh => cache.fc1_act[i]
                .iter()
                .zip(&dact)
                .map(|(&y, &g)| (T::one() - y * y) * g)
                .collect(),
            Activation::Relu => cache.fc1_lin[i]
                .iter()
                .zip(&dact)
                .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                .collect(),
        };
        dfeatures.push(fc_backward(&cache.features[i], &params.fc1, &dlin, &mut fc1_grads));
    }

    let mut branch_grads = Vec::with_capacity(params.branches.len());
    let mut offset = 0usize;
    for (branch, bc) in params.branches.iter().zip(&cache.branches) {
        let out_len = bc.blocks.last().unwrap().out[0].len();
        // slice this branch's window out of the concatenated feature gradient
        let mut grads: Vec<Tensor<T>> = (0..b)
            .map(|i| {
                let shape = bc.blocks.last().unwrap().out[i].shape().to_vec();
                Tensor::from_vec(&shape, dfeatures[i][offset..offset + out_len].to_vec())
            })
            .collect();
        offset += out_len;

        let mut block_grads: Vec<BlockGrads<T>> = Vec::with_capacity(branch.blocks.len());
        for (bi, block) in branch.blocks.iter().enumerate().rev() {
            let c = &bc.blocks[bi];
            if block.pool {
                grads = match cfg.pooling {
                    Pooling::Avg => grads
                        .iter()
                        .enumerate()
                        .map(|(i, g)| avgpool_3x3_s2_backward(c.act_out[i].shape(), g))
                        .collect(),
                    Pooling::Max => {
                        let argmax = c.argmax.as_ref().unwrap();
                        grads
                            .iter()
                            .enumerate()
                            .map(|(i, g)| {
                                maxpool_3x3_s2_backward(c.act_out[i].shape(), &argmax[i], g)
                            })
                            .collect()
                    }
                };
            }
            grads = match cfg.activation {
                Activation::Tanh => c
                    .act_out
                    .iter()
                    .zip(&grads)
                    .map(|(y, g)| tanh_backward(y, g))
                    .collect(),
                Activation::Relu => c
                    .pre_act
                    .as_ref()
                    .unwrap()
                    .iter()
                    .zip(&grads)
                    .map(|(x, g)| relu_backward(x, g))
                    .collect(),
            };
            let bn_grads = match (&block.bn, &c.bn_cache) {
                (Some(state), Some(cache)) => {
                    let (g, bg) = batchnorm_backward(&c.conv_out, cache, state, &grads);
                    grads = g;
                    Some(bg)
                }
                _ => None,
            };
            let mut conv_grads = ConvGrads::zeros_like(&block.conv);
            let inputs: &[Tensor<T>] = if bi == 0 { &bc.fed } else { &bc.blocks[bi - 1].out };
            let mut next = Vec::with_capacity(b);
            for (x, g) in inputs.iter().zip(&grads) {
                let (gi, gk) = conv2d_same_backward(x, &block.conv, g)?;
                conv_grads.kernels.data_mut()
                    .iter_mut()
                    .zip(gk.kernels.data())
                    .for_each(|(a, &v)| *a = *a + v);
                conv_grads.bias
                    .iter_mut()
                    .zip(&gk.bias)
                    .for_each(|(a, &v)| *a = *a + v);
                next.push(gi);
            }
            grads = next;
            block_grads.push(BlockGrads {
                conv: conv_grads,
                bn: bn_grads,
            });
        }
        block_grads.reverse();
        if cfg.use_abs {
            // no parameters, but keep the chain correct for gradient checks
            for (x, g) in bc.raw.iter().zip(&mut grads) {
                *g = abs_backward(x, g);
            }
        }
        branch_grads.push(block_grads);
    }

    Ok(GradTape {
        branches: branch_grads,
        fc1: fc1_grads,
        fc2: fc2_grads,
    })
}

/// Plain SGD step over every learnable buffer.
pub fn apply_sgd<T: Scalar>(
    params: &mut ModelParams<T>,
    tape: &GradTape<T>,
    alpha: T,
) -> Result<(), TensorError> {
    for (branch, grads) in params.branches.iter_mut().zip(&tape.branches) {
        for (block, g) in branch.blocks.iter_mut().zip(grads) {
            sgd_update(block.conv.kernels.data_mut(), g.conv.kernels.data(), alpha)?;
            sgd_update(&mut block.conv.bias, &g.conv.bias, alpha)?;
            if let (Some(bn), Some(bg)) = (&mut block.bn, &g.bn) {
                sgd_update(&mut bn.gamma, &bg.gamma, alpha)?;
                sgd_update(&mut bn.beta, &bg.beta, alpha)?;
            }
        }
    }
    sgd_update(&mut params.fc1.weights, &tape.fc1.weights, alpha)?;
    sgd_update(&mut params.fc1.bias, &tape.fc1.bias, alpha)?;
    sgd_update(&mut params.fc2.weights, &tape.fc2.weights, alpha)?;
    sgd_update(&mut params.fc2.bias, &tape.fc2.bias, alpha)?;
    Ok(())
}

impl<T: Scalar> ModelParams<T> {
    fn visit(&self, mut f: impl FnMut(&[T])) {
        for branch in &self.branches {
            for block in &branch.blocks {
                f(block.conv.kernels.data());
                f(&block.conv.bias);
                if let Some(bn) = &block.bn {
                    f(&bn.gamma);
                    f(&bn.beta);
                }
            }
        }
        f(&self.fc1.weights);
        f(&self.fc1.bias);
        f(&self.fc2.weights);
        f(&self.fc2.bias);
    }

    /// All learnable parameters (not the batch-norm moving statistics) as a
    /// flat real64 vector, in a fixed traversal order shared with
    /// [`GradTape::flatten`] and [`ModelParams::assign`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(|s| out.extend(s.iter().map(|v| v.to_f64().unwrap())));
        out
    }

    pub fn n_params(&self) -> usize {
        let mut n = 0;
        self.visit(|s| n += s.len());
        n
    }

    /// Overwrite the learnable parameters from a flat vector.
    pub fn assign(&mut self, flat: &[f64]) -> Result<(), TensorError> {
        if flat.len() != self.n_params() {
            return Err(TensorError::ShapeMismatch(format!(
                "assign: {} values for {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        let mut pos = 0usize;
        let mut write = |s: &mut [T]| {
            for v in s.iter_mut() {
                *v = T::from_f64(flat[pos]).unwrap();
                pos += 1;
            }
        };
        for branch in &mut self.branches {
            for block in &mut branch.blocks {
                write(block.conv.kernels.data_mut());
                write(&mut block.conv.bias);
                if let Some(bn) = &mut block.bn {
                    write(&mut bn.gamma);
                    write(&mut bn.beta);
                }
            }
        }
        write(&mut self.fc1.weights);
        write(&mut self.fc1.bias);
        write(&mut self.fc2.weights);
        write(&mut self.fc2.bias);
        Ok(())
    }
}

impl<T: Scalar> GradTape<T> {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for branch in &self.branches {
            for block in branch {
                out.extend(block.conv.kernels.data().iter().map(|v| v.to_f64().unwrap()));
                out.extend(block.conv.bias.iter().map(|v| v.to_f64().unwrap()));
                if let Some(bn) = &block.bn {
                    out.extend(bn.gamma.iter().map(|v| v.to_f64().unwrap()));
                    out.extend(bn.beta.iter().map(|v| v.to_f64().unwrap()));
                }
            }
        }
        out.extend(self.fc1.weights.iter().map(|v| v.to_f64().unwrap()));
        out.extend(self.fc1.bias.iter().map(|v| v.to_f64().unwrap()));
        out.extend(self.fc2.weights.iter().map(|v| v.to_f64().unwrap()));
        out.extend(self.fc2.bias.iter().map(|v| v.to_f64().unwrap()));
        out
    }
}

/// Check the whole-network analytic gradient against central finite
/// differences in real64. Every loss evaluation runs on a fresh copy of the
/// parameters so the batch-norm moving statistics never drift.
pub fn grad_check_model(
    params: &ModelParams<f64>,
    batch: &[Tensor<f64>],
    labels: &[usize],
    rel_tol: f64,
) -> crate::gradcheck::GradCheckReport {
    let mut work = params.clone();
    let cache = forward_train(&mut work, batch).unwrap();
    let tape = backward(&work, &cache, labels).unwrap();
    let analytic = tape.flatten();
    let mut theta = params.flatten();
    let loss = |flat: &[f64]| -> f64 {
        let mut p = params.clone();
        p.assign(flat).unwrap();
        let cache = forward_train(&mut p, batch).unwrap();
        batch_loss(&cache, labels).unwrap()
    };
    crate::gradcheck::check_gradients(loss, &mut theta, &analytic, rel_tol)
}
