//! Scratch probe: training stability across learning rates and seeds at the
//! current corpus contrast. A collapsed run shows up as accuracy near 0.1.

use shield_core::dataset::{generate_synthetic, SplitTag};
use shield_core::nn::{accuracy, train, Init, TrainConfig};

fn main() {
    let train_data = generate_synthetic(200, 0x7457, SplitTag::Train).unwrap();
    let eval_data = generate_synthetic(100, 0xE7A1, SplitTag::Eval).unwrap();

    for lr in [0.05, 0.04, 0.03, 0.02] {
        for quality in [None, Some(20u8)] {
            let mut accs = Vec::new();
            for seed in 0..10u64 {
                let cfg = TrainConfig {
                    epochs: 20,
                    batch_size: 32,
                    learning_rate: lr,
                    momentum: 0.9,
                    seed: 0x5AB1E + seed * 7919,
                    jpeg_quality: quality,
                    init: Init::Random,
                };
                let m = train(&cfg, &train_data).unwrap();
                accs.push(accuracy(&m, &eval_data).unwrap());
            }
            let min = accs.iter().cloned().fold(1.0, f64::min);
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let collapsed = accs.iter().filter(|&&a| a < 0.5).count();
            println!(
                "lr {lr:.2} quality {:>4}: min {min:.3} mean {mean:.3} collapsed {collapsed}/10",
                quality.map(|q| q.to_string()).unwrap_or("none".into())
            );
        }
    }
}
