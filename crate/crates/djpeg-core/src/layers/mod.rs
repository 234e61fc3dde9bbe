//! Layer primitives: convolution, batch normalization, activations, pooling,
//! fully connected, softmax/cross-entropy, and SGD updates.

pub mod activation;
pub mod conv;
pub mod dense;
pub mod norm;
pub mod pool;

pub use activation::{
    abs_backward, abs_forward, relu_backward, relu_forward, tanh_backward, tanh_forward,
};
pub use conv::{conv2d_same, conv2d_same_backward, ConvGrads, ConvParams};
pub use dense::{
    cross_entropy, fc_backward, fc_forward, sgd_update, softmax, softmax_xent_grad, FcGrads,
    FcParams,
};
pub use norm::{batchnorm_backward, batchnorm_infer, batchnorm_train, BnCache, BnGrads, BnState};
pub use pool::{
    avgpool_3x3_s2, avgpool_3x3_s2_backward, maxpool_3x3_s2, maxpool_3x3_s2_backward,
};
