//! Deterministic synthetic grayscale images for tests and demos.
//!
//! Natural photographs have roughly 1/f spectra and scene structure (edges,
//! flat regions, gradients), which is what makes their quantized DCT
//! statistics (and first-digit histograms) informative. The generator mimics
//! that cheaply: a random luminance gradient, a sum of random-phase sinusoids
//! with amplitudes falling off with frequency, a handful of soft-edged
//! elliptical patches that add step structure, and fine-grained noise, all
//! mapped into the 8-bit range. Every parameter is drawn per image, so images
//! rendered from different seeds differ in content and not just in phase.
//! Same seed, same bytes - everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::jpeg::GrayImage;

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
}

struct Patch {
    cx: f64,
    cy: f64,
    // inverse squared radii along the rotated axes
    inv_rx2: f64,
    inv_ry2: f64,
    cos_a: f64,
    sin_a: f64,
    delta: f64,
    /// Width of the soft edge in units of the normalized ellipse radius.
    soft: f64,
}

impl Patch {
    fn value(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = dx * self.cos_a + dy * self.sin_a;
        let v = -dx * self.sin_a + dy * self.cos_a;
        let d2 = u * u * self.inv_rx2 + v * v * self.inv_ry2;
        if d2 >= 1.0 {
            return 0.0;
        }
        // smoothstep from the soft-edge band down to the boundary
        let t = ((1.0 - d2) / self.soft).clamp(0.0, 1.0);
        self.delta * t * t * (3.0 - 2.0 * t)
    }
}

/// Render a `width` x `height` 8-bit grayscale image from `seed`.
pub fn synth_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ 0x53594e54);
    let (wf, hf) = (width as f64, height as f64);

    let base = rng.gen_range(100.0..156.0);
    // smooth global gradient across the frame
    let gx = rng.gen_range(-50.0..50.0) / wf;
    let gy = rng.gen_range(-50.0..50.0) / hf;

    let n_waves = rng.gen_range(10..=24);
    let waves: Vec<Wave> = (0..n_waves)
        .map(|_| {
            // frequencies skewed toward the low end; amplitude ~ 1/f
            let f = 0.004 + 0.35 * rng.gen::<f64>().powi(2);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            Wave {
                fx: f * angle.cos(),
                fy: f * angle.sin(),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                amp: rng.gen_range(4.0..26.0) / (1.0 + 20.0 * f),
            }
        })
        .collect();

    let n_patches = rng.gen_range(6..=18);
    let patches: Vec<Patch> = (0..n_patches)
        .map(|_| {
            let rx = rng.gen_range(0.04..0.35) * wf;
            let ry = rng.gen_range(0.04..0.35) * hf;
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            Patch {
                cx: rng.gen_range(-0.1 * wf..1.1 * wf),
                cy: rng.gen_range(-0.1 * hf..1.1 * hf),
                inv_rx2: (rx * rx).recip(),
                inv_ry2: (ry * ry).recip(),
                cos_a: angle.cos(),
                sin_a: angle.sin(),
                delta: rng.gen_range(18.0..70.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 },
                soft: rng.gen_range(0.02..0.4),
            }
        })
        .collect();

    let noise_amp = rng.gen_range(2.0..7.0);
    let wave_norm = (n_waves as f64).sqrt();

    // Very-low-frequency texture-energy mask: photographs mix busy regions
    // with near-flat ones (sky, walls), and the flat blocks carry most of
    // the recompression evidence. The mask scales waves and noise between
    // almost-off and full strength across the frame.
    let mask_waves: Vec<Wave> = (0..4)
        .map(|_| {
            let f = rng.gen_range(0.008..0.04);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            Wave {
                fx: f * angle.cos(),
                fy: f * angle.sin(),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                amp: 1.0,
            }
        })
        .collect();

    let mut samples = Vec::with_capacity(width * height);
    for y in 0..height {
        let yf = y as f64;
        for x in 0..width {
            let xf = x as f64;
            let mut texture = 0.0;
            for w in &waves {
                texture += w.amp
                    * (std::f64::consts::TAU * (w.fx * xf + w.fy * yf) + w.phase).sin()
                    / wave_norm
                    * 3.0;
            }
            texture += rng.gen_range(-noise_amp..noise_amp);
            let mask_sum: f64 = mask_waves
                .iter()
                .map(|w| (std::f64::consts::TAU * (w.fx * xf + w.fy * yf) + w.phase).sin())
                .sum();
            // map the [-4, 4] wave sum to a [0.02, 1] amplitude factor,
            // cubed to widen the near-flat patches
            let t = (0.5 + mask_sum / 8.0).clamp(0.0, 1.0);
            let mask = 0.02 + 0.98 * t * t * t;

            let mut v = base + gx * (xf - wf / 2.0) + gy * (yf - hf / 2.0) + mask * texture;
            for p in &patches {
                v += p.value(xf, yf);
            }
            samples.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(width, height, samples)
}
