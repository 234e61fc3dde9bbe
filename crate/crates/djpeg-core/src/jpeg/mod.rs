//! Baseline sequential grayscale JPEG codec.
//!
//! The decode path can stop at entropy decoding to yield the raw quantized
//! DCT coefficients, which is what the detection pipeline consumes.

pub mod consts;
pub mod dct;
mod decoder;
mod encoder;
mod huffman;
mod pgm;

pub use dct::{block_to_pixels, dequantize, fdct8x8, idct8x8, quantize, round_half_away};
pub use decoder::{decode_to_coeffs, decode_to_pixels};
pub use encoder::{encode_gray, encode_gray_with_coeffs};
pub use pgm::{read_pgm, write_pgm};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported stream: {0}")]
    Unsupported(String),
    #[error("malformed stream: {0}")]
    Malformed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Self {
        assert_eq!(samples.len(), width * height);
        GrayImage {
            width,
            height,
            samples,
        }
    }

    pub fn constant(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            samples: vec![value; width * height],
        }
    }
}

/// 64 quantization steps in natural (row-major) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantTable {
    pub steps: [u16; 64],
}

/// Grid of 8x8 blocks of quantized DCT coefficients, as entropy-decoded.
/// Per-block coefficients are stored in natural order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffImage {
    pub blocks_high: usize,
    pub blocks_wide: usize,
    pub width: usize,
    pub height: usize,
    /// blocks_high * blocks_wide * 64 values, block raster order.
    pub coeffs: Vec<i32>,
    pub quant: QuantTable,
}

impl CoeffImage {
    pub fn block(&self, by: usize, bx: usize) -> &[i32] {
        let i = (by * self.blocks_wide + bx) * 64;
        &self.coeffs[i..i + 64]
    }
}

/// Quality-factor scaling of the standard luminance table (the conventional
/// mapping: scale = 5000/qf below 50, else 200 - 2*qf; steps clamped to
/// [1, 255]).
pub fn quant_table_for_qf(qf: u32) -> Result<QuantTable, CodecError> {
    if !(1..=100).contains(&qf) {
        return Err(CodecError::InvalidInput(format!(
            "quality factor {qf} outside 1..=100"
        )));
    }
    let scale = if qf < 50 { 5000 / qf } else { 200 - 2 * qf };
    let mut steps = [0u16; 64];
    for (s, &base) in steps.iter_mut().zip(consts::BASE_LUMA_QTABLE.iter()) {
        *s = ((base as u32 * scale + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(QuantTable { steps })
}

/// Decode, then re-encode at `qf2`: the double-compression operator.
pub fn recompress(stream: &[u8], qf2: u32) -> Result<Vec<u8>, CodecError> {
    let img = decode_to_pixels(stream)?;
    encode_gray(&img, qf2)
}
