//! Double JPEG compression detection toolkit.
//!
//! Pipeline: parse quantized DCT coefficients straight from baseline
//! grayscale JPEG bitstreams, assemble the first 20 AC sub-bands into a
//! tensor, and classify single vs. double compression with a 21-branch CNN
//! trained from scratch, or with mode-based first-digit features plus a
//! Fisher linear discriminant.

pub mod dataset;
pub mod dctinput;
pub mod gradcheck;
pub mod layers;
pub mod mbfdf;
pub mod jpeg;
pub mod model;
pub mod synth;
pub mod tensor;

pub use tensor::{Dtype, Scalar, Tensor, TensorError};
