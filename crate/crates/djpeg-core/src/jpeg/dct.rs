//! Floating-point 8x8 forward/inverse DCT with JPEG normalization, plus
//! quantization with round-half-away-from-zero.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::QuantTable;

/// Orthonormal 1-D DCT basis: BASIS[u][x] = k(u) * cos((2x+1) u pi / 16).
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let k = if u == 0 {
                (1.0f64 / 8.0).sqrt()
            } else {
                0.5
            };
            for (x, v) in row.iter_mut().enumerate() {
                *v = k * ((2.0 * x as f64 + 1.0) * u as f64 * PI / 16.0).cos();
            }
        }
        b
    })
}

/// Level-shift by -128, then 2-D DCT-II. Output in natural order.
pub fn fdct8x8(samples: &[u8; 64]) -> [f64; 64] {
    let b = basis();
    let mut shifted = [0.0f64; 64];
    for (s, &p) in shifted.iter_mut().zip(samples.iter()) {
        *s = p as f64 - 128.0;
    }
    // rows: tmp[u][y] = sum_x B[u][x] * f[x][y]  (transform columns first)
    let mut tmp = [0.0f64; 64];
    for u in 0..8 {
        for y in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += b[u][x] * shifted[x * 8 + y];
            }
            tmp[u * 8 + y] = acc;
        }
    }
    let mut out = [0.0f64; 64];
    for u in 0..8 {
        for v in 0..8 {
            let mut acc = 0.0;
            for y in 0..8 {
                acc += b[v][y] * tmp[u * 8 + y];
            }
            out[u * 8 + v] = acc;
        }
    }
    out
}

/// Inverse of [`fdct8x8`] before rounding; output still carries the -128
/// level shift (the caller adds 128, rounds, and clamps).
pub fn idct8x8(coeffs: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0f64; 64];
    for x in 0..8 {
        for v in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                acc += b[u][x] * coeffs[u * 8 + v];
            }
            tmp[x * 8 + v] = acc;
        }
    }
    let mut out = [0.0f64; 64];
    for x in 0..8 {
        for y in 0..8 {
            let mut acc = 0.0;
            for v in 0..8 {
                acc += b[v][y] * tmp[x * 8 + v];
            }
            out[x * 8 + y] = acc;
        }
    }
    out
}

/// Round half away from zero.
#[inline]
pub fn round_half_away(v: f64) -> f64 {
    if v >= 0.0 {
        (v + 0.5).floor()
    } else {
        (v - 0.5).ceil()
    }
}

/// Quantize DCT coefficients: round(c / step) half away from zero.
pub fn quantize(coeffs: &[f64; 64], q: &QuantTable) -> [i32; 64] {
    let mut out = [0i32; 64];
    for i in 0..64 {
        out[i] = round_half_away(coeffs[i] / q.steps[i] as f64) as i32;
    }
    out
}

/// Multiply quantized values back by their steps.
pub fn dequantize(quantized: &[i32; 64], q: &QuantTable) -> [f64; 64] {
    let mut out = [0.0f64; 64];
    for i in 0..64 {
        out[i] = quantized[i] as f64 * q.steps[i] as f64;
    }
    out
}

/// Reconstruct pixels: inverse DCT, +128, round half away from zero, clamp.
pub fn block_to_pixels(coeffs: &[f64; 64]) -> [u8; 64] {
    let spatial = idct8x8(coeffs);
    let mut out = [0u8; 64];
    for (o, &v) in out.iter_mut().zip(spatial.iter()) {
        *o = round_half_away(v + 128.0).clamp(0.0, 255.0) as u8;
    }
    out
}
