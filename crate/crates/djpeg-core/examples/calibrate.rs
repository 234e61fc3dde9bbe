use djpeg_core::dataset::PairSample;
use djpeg_core::dctinput::assemble_subbands;
use djpeg_core::jpeg::{decode_to_coeffs, encode_gray, recompress};
use djpeg_core::mbfdf::{extract_mbfdf, fld_classify, fld_train};
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
    let n_train: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(300);
    let n_test: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(100);
    let epochs: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(10);
    let lr_step: usize = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(20);

    let t0 = Instant::now();
    let train_pairs = make_pairs(qf1, qf2, 1000..1000 + n_train as u64);
    let test_pairs = make_pairs(qf1, qf2, 9000..9000 + n_test as u64);
    println!("data built in {:?}", t0.elapsed());

    // MBFDF baseline works on coefficient images, so rebuild them directly.
    let feats = |qfa: u32, qfb: u32, seeds: std::ops::Range<u64>, double: bool| -> Vec<Vec<f64>> {
        seeds
            .map(|s| {
                let img = synth_image(256, 256, s);
                let c = if double {
                    decode_to_coeffs(&recompress(&encode_gray(&img, qfa).unwrap(), qfb).unwrap())
                        .unwrap()
                } else {
                    decode_to_coeffs(&encode_gray(&img, qfb).unwrap()).unwrap()
                };
                extract_mbfdf(&c)
            })
            .collect()
    };
    let c0 = feats(qf1, qf2, 1000..1000 + n_train as u64, false);
    let c1 = feats(qf1, qf2, 1000..1000 + n_train as u64, true);
    let m = fld_train(&c0, &c1).unwrap();
    let t0f = feats(qf1, qf2, 9000..9000 + n_test as u64, false);
    let t1f = feats(qf1, qf2, 9000..9000 + n_test as u64, true);
    let correct = t0f.iter().filter(|x| fld_classify(&m, x) == 0).count()
        + t1f.iter().filter(|x| fld_classify(&m, x) == 1).count();
    println!("MBFDF acc: {:.3}", correct as f64 / (2 * n_test) as f64);

    let cfg = NetworkConfig::default();
    let tc = TrainConfig {
        epochs,
        lr_step_epochs: lr_step,
        validate_from_epoch: (epochs / 2).max(1),
        seed: 7,
        ..TrainConfig::default()
    };
    let t1 = Instant::now();
    let out = train(&train_pairs, &test_pairs[..n_test / 2], &cfg, &tc).unwrap();
    println!("trained in {:?}", t1.elapsed());
    for e in &out.history {
        println!(
            "epoch {:2} lr {:.4} loss {:.4} acc {:.3} val {:?}",
            e.epoch, e.lr, e.train_loss, e.train_acc, e.val_acc
        );
    }
    let metrics = evaluate(&out.best, &pairs_to_samples(&test_pairs)).unwrap();
    let final_metrics = evaluate(&out.last, &pairs_to_samples(&test_pairs)).unwrap();
    println!(
        "CNN test acc ({qf1},{qf2}): {:.3} (best epoch {}), final-epoch model: {:.3}",
        metrics.accuracy, out.best_epoch, final_metrics.accuracy
    );
}
