//! Fast signal-strength probe for a (qf1, qf2) pair: MBFDF+FLD accuracy and
//! the class-mean L1 gap, without any CNN training.
//!
//! Usage: mbprobe <qf1> <qf2> <n_train> <n_test>

use djpeg_core::jpeg::{decode_to_coeffs, encode_gray, recompress};
use djpeg_core::mbfdf::{extract_mbfdf, fld_classify, fld_train};
use djpeg_core::synth::synth_image;

fn feats(qf1: u32, qf2: u32, seeds: std::ops::Range<u64>, double: bool) -> Vec<Vec<f64>> {
    seeds
        .map(|s| {
            let img = synth_image(256, 256, s);
            let c = if double {
                decode_to_coeffs(&recompress(&encode_gray(&img, qf1).unwrap(), qf2).unwrap())
                    .unwrap()
            } else {
                decode_to_coeffs(&encode_gray(&img, qf2).unwrap()).unwrap()
            };
            extract_mbfdf(&c)
        })
        .collect()
}

fn mean_of(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    for a in &mut m {
        *a /= rows.len() as f64;
    }
    m
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let qf1: u32 = args[1].parse().unwrap();
    let qf2: u32 = args[2].parse().unwrap();
    let n_train: usize = args[3].parse().unwrap();
    let n_test: usize = args[4].parse().unwrap();

    let c0 = feats(qf1, qf2, 1000..1000 + n_train as u64, false);
    let c1 = feats(qf1, qf2, 1000..1000 + n_train as u64, true);
    let model = fld_train(&c0, &c1).unwrap();
    let t0 = feats(qf1, qf2, 9000..9000 + n_test as u64, false);
    let t1 = feats(qf1, qf2, 9000..9000 + n_test as u64, true);
    let correct = t0.iter().filter(|x| fld_classify(&model, x) == 0).count()
        + t1.iter().filter(|x| fld_classify(&model, x) == 1).count();

    let m0 = mean_of(&t0);
    let m1 = mean_of(&t1);
    let between = l1(&m0, &m1);
    let spread = (t0.iter().map(|r| l1(r, &m0)).sum::<f64>() / t0.len() as f64
        + t1.iter().map(|r| l1(r, &m1)).sum::<f64>() / t1.len() as f64)
        / 2.0;
    println!(
        "({qf1},{qf2}) fld acc {:.3}  between-class L1 {:.4}  within-class spread {:.4}  ratio {:.2}",
        correct as f64 / (2 * n_test) as f64,
        between,
        spread,
        between / spread
    );
}
