//! Dense row-major tensor used by all layer computation.

use std::fmt;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Element type for tensor math. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + std::iter::Sum
    + 'static
{
    const DTYPE: Dtype;
}

impl Scalar for f32 {
    const DTYPE: Dtype = Dtype::Real32;
}
impl Scalar for f64 {
    const DTYPE: Dtype = Dtype::Real64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    Real32,
    Real64,
}

impl Dtype {
    pub fn byte_width(self) -> usize {
        match self {
            Dtype::Real32 => 4,
            Dtype::Real64 => 8,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value produced in {0}")]
    NonFinite(String),
}

/// Dense n-dimensional array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Index into a rank-3 tensor [H, W, D].
    #[inline(always)]
    pub fn idx3(&self, h: usize, w: usize, d: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 3);
        (h * self.shape[1] + w) * self.shape[2] + d
    }

    #[inline(always)]
    pub fn get3(&self, h: usize, w: usize, d: usize) -> T {
        self.data[self.idx3(h, w, d)]
    }

    #[inline(always)]
    pub fn set3(&mut self, h: usize, w: usize, d: usize, v: T) {
        let i = self.idx3(h, w, d);
        self.data[i] = v;
    }

    /// Index into a rank-4 tensor [A, B, C, D].
    #[inline(always)]
    pub fn idx4(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 4);
        ((a * self.shape[1] + b) * self.shape[2] + c) * self.shape[3] + d
    }

    #[inline(always)]
    pub fn get4(&self, a: usize, b: usize, c: usize, d: usize) -> T {
        self.data[self.idx4(a, b, c, d)]
    }

    #[inline(always)]
    pub fn set4(&mut self, a: usize, b: usize, c: usize, d: usize, v: T) {
        let i = self.idx4(a, b, c, d);
        self.data[i] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Cast every element; used when moving between real32 and real64 modes.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from(v.to_f64().unwrap()).unwrap())
                .collect(),
        }
    }
}
