//! Ablation trend probe: full model vs no-BN / no-ABS / joint-branch-only on
//! a given (qf1, qf2) pair, several seeds, small scale.
//!
//! Usage: ablation <qf1> <qf2> <n_train> <n_test> <epochs> [seeds...]

use djpeg_core::dataset::PairSample;
use djpeg_core::dctinput::assemble_subbands;
use djpeg_core::jpeg::{decode_to_coeffs, encode_gray, recompress};
use djpeg_core::model::*;
use djpeg_core::synth::synth_image;
use std::time::Instant;

fn make_pairs(qf1: u32, qf2: u32, seeds: std::ops::Range<u64>) -> Vec<PairSample<f32>> {
    seeds
        .map(|s| {
            let img = synth_image(256, 256, s);
            let single = decode_to_coeffs(&encode_gray(&img, qf2).unwrap()).unwrap();
            let double =
                decode_to_coeffs(&recompress(&encode_gray(&img, qf1).unwrap(), qf2).unwrap())
                    .unwrap();
            PairSample {
                single: assemble_subbands(&single),
                double: assemble_subbands(&double),
                tile_id: format!("t{s}"),
            }
        })
        .collect()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let qf1: u32 = args[1].parse().unwrap();
    let qf2: u32 = args[2].parse().unwrap();
    let n_train: usize = args[3].parse().unwrap();
    let n_test: usize = args[4].parse().unwrap();
    let epochs: usize = args[5].parse().unwrap();
    let seeds: Vec<u64> = if args.len() > 6 {
        args[6..].iter().map(|s| s.parse().unwrap()).collect()
    } else {
        vec![11, 12, 13]
    };

    let t0 = Instant::now();
    let train_pairs = make_pairs(qf1, qf2, 30_000..30_000 + n_train as u64);
    let test_pairs = make_pairs(qf1, qf2, 39_000..39_000 + n_test as u64);
    println!("data built in {:.1}s", t0.elapsed().as_secs_f64());

    let variants: [(&str, NetworkConfig); 4] = [
        ("full", NetworkConfig::default()),
        (
            "no-bn",
            NetworkConfig {
                use_bn: false,
                ..NetworkConfig::default()
            },
        ),
        (
            "no-abs",
            NetworkConfig {
                use_abs: false,
                ..NetworkConfig::default()
            },
        ),
        (
            "joint-only",
            NetworkConfig {
                use_intra_branches: false,
                ..NetworkConfig::default()
            },
        ),
    ];

    for (name, cfg) in &variants {
        let mut accs = Vec::new();
        for &seed in &seeds {
            let tc = TrainConfig {
                epochs,
                validate_from_epoch: (epochs / 2).max(1),
                seed,
                ..TrainConfig::default()
            };
            let t1 = Instant::now();
            let out = train(&train_pairs, &test_pairs[..n_test / 5], &cfg.clone(), &tc).unwrap();
            let m = evaluate(&out.best, &pairs_to_samples(&test_pairs)).unwrap();
            println!(
                "{name} seed {seed}: acc {:.3} ({:.0}s)",
                m.accuracy,
                t1.elapsed().as_secs_f64()
            );
            accs.push(m.accuracy);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        println!("{name}: mean {:.3}", mean);
    }
}
