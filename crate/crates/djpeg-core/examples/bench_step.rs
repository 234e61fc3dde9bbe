use djpeg_core::model::*;
use djpeg_core::Tensor;
use std::time::Instant;

fn main() {
    let cfg = NetworkConfig::default();
    let tc = TrainConfig::default();
    let mut params = build_network::<f32>(&cfg, &tc);
    let batch: Vec<Tensor<f32>> = (0..50)
        .map(|i| {
            let data = (0..32 * 32 * 20).map(|j| ((i * 31 + j * 7) % 21) as f32 - 10.0).collect();
            Tensor::from_vec(&[32, 32, 20], data)
        })
        .collect();
    let labels: Vec<usize> = (0..50).map(|i| i % 2).collect();
    let t0 = Instant::now();
    for _ in 0..3 {
        let cache = forward_train(&mut params, &batch).unwrap();
        let tape = backward(&params, &cache, &labels).unwrap();
        apply_sgd(&mut params, &tape, 0.01).unwrap();
    }
    println!("3 train steps (batch 50): {:?}", t0.elapsed());
    let t1 = Instant::now();
    for s in batch.iter().take(10) {
        forward_infer(&params, s).unwrap();
    }
    println!("10 infer samples: {:?}", t1.elapsed());
}
