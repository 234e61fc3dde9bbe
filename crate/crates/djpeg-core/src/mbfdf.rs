//! First-significant-digit baseline detector.
//!
//! Natural single-compressed JPEG coefficients follow a smooth logarithmic
//! first-digit law; recompression disturbs it. The feature vector is one
//! 9-bin first-digit histogram per AC mode for the first 20 zigzag modes
//! (180 values), classified with a regularized Fisher linear discriminant.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::jpeg::consts::ZIGZAG;
use crate::jpeg::CoeffImage;
use crate::tensor::TensorError;

/// Number of AC modes and histogram bins per mode.
pub const MODES: usize = 20;
pub const DIGITS: usize = 9;
pub const FEATURE_LEN: usize = MODES * DIGITS;

/// Leading decimal digit of |v|; zero has none and is excluded everywhere.
pub fn first_significant_digit(v: i32) -> Option<u32> {
    let mut m = (v as i64).unsigned_abs();
    if m == 0 {
        return None;
    }
    while m >= 10 {
        m /= 10;
    }
    Some(m as u32)
}

/// 180-value feature vector of one coefficient image: per mode, the digit
/// histogram over nonzero coefficients, normalized to sum to one. A mode
/// with no nonzero coefficients contributes nine zeros.
pub fn extract_mbfdf(c: &CoeffImage) -> Vec<f64> {
    let mut features = vec![0.0; FEATURE_LEN];
    for (mode, feat) in features.chunks_exact_mut(DIGITS).enumerate() {
        let nat = ZIGZAG[mode + 1]; // modes are AC zigzag positions 1..=20
        let mut counts = [0u64; DIGITS];
        let mut total = 0u64;
        for by in 0..c.blocks_high {
            for bx in 0..c.blocks_wide {
                if let Some(d) = first_significant_digit(c.block(by, bx)[nat]) {
                    counts[(d - 1) as usize] += 1;
                    total += 1;
                }
            }
        }
        if total > 0 {
            for (f, &n) in feat.iter_mut().zip(&counts) {
                *f = n as f64 / total as f64;
            }
        }
    }
    features
}

/// Fisher linear discriminant with a ridge floor on the within-class
/// scatter. Class 1 projects above the threshold; ties go to class 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FldModel {
    pub w: Vec<f64>,
    pub threshold: f64,
}

fn mean(xs: &[Vec<f64>], dim: usize) -> DVector<f64> {
    let mut m = DVector::zeros(dim);
    for x in xs {
        m += DVector::from_column_slice(x);
    }
    m / xs.len() as f64
}

/// Train on two classes of feature vectors.
///
/// w = (S_w + eps I)^-1 (mu1 - mu0) with eps = 1e-6 * trace(S_w) / dim, and
/// the threshold is the midpoint of the projected class means.
pub fn fld_train(class0: &[Vec<f64>], class1: &[Vec<f64>]) -> Result<FldModel, TensorError> {
    if class0.is_empty() || class1.is_empty() {
        return Err(TensorError::ShapeMismatch(
            "fld_train: both classes need at least one sample".into(),
        ));
    }
    let dim = class0[0].len();
    for x in class0.iter().chain(class1) {
        if x.len() != dim {
            return Err(TensorError::ShapeMismatch(format!(
                "fld_train: feature length {} != {dim}",
                x.len()
            )));
        }
    }

    let mu0 = mean(class0, dim);
    let mu1 = mean(class1, dim);
    let mut sw = DMatrix::<f64>::zeros(dim, dim);
    for (xs, mu) in [(class0, &mu0), (class1, &mu1)] {
        for x in xs {
            let d = DVector::from_column_slice(x) - mu;
            sw += &d * d.transpose();
        }
    }
    // absolute floor keeps the solve defined when S_w is exactly zero
    let eps = (1e-6 * sw.trace() / dim as f64).max(1e-12);
    for i in 0..dim {
        sw[(i, i)] += eps;
    }

    let diff = &mu1 - &mu0;
    let w = sw.lu().solve(&diff).ok_or_else(|| {
        TensorError::NonFinite("fld_train: singular within-class scatter".into())
    })?;
    let threshold = (w.dot(&mu0) + w.dot(&mu1)) / 2.0;
    Ok(FldModel {
        w: w.as_slice().to_vec(),
        threshold,
    })
}

pub fn fld_classify(model: &FldModel, x: &[f64]) -> usize {
    let proj: f64 = model.w.iter().zip(x).map(|(w, v)| w * v).sum();
    usize::from(proj > model.threshold)
}

/// Write features as CSV: header `m{mode}_d{digit},...,label`, one row per
/// sample.
pub fn write_features_csv<W: Write>(
    rows: &[(Vec<f64>, usize)],
    w: &mut W,
) -> std::io::Result<()> {
    let mut header = Vec::with_capacity(FEATURE_LEN + 1);
    for mode in 1..=MODES {
        for digit in 1..=DIGITS {
            header.push(format!("m{mode}_d{digit}"));
        }
    }
    header.push("label".into());
    writeln!(w, "{}", header.join(","))?;
    for (feat, label) in rows {
        for v in feat {
            write!(w, "{v},")?;
        }
        writeln!(w, "{label}")?;
    }
    Ok(())
}
