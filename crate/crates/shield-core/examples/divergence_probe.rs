//! Scratch probe: how base under-training spreads the derivative quartet.
//! Prints weight cosines and member accuracies per base_epochs setting.

use shield_core::dataset::{generate_synthetic, SplitTag};
use shield_core::harness::{train_replicate, ReplicateConfig};
use shield_core::nn::{accuracy, weight_cosine_similarity, ModelParams};

fn mean_pairwise_cosine(models: &[ModelParams]) -> f64 {
    let mut acc = 0.0;
    let mut n = 0;
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            acc += weight_cosine_similarity(&models[i], &models[j]).unwrap();
            n += 1;
        }
    }
    acc / n as f64
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    let factor: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let train_data = generate_synthetic(200, 0x7457, SplitTag::Train).unwrap();
    let eval_data = generate_synthetic(100, 0xE7A1, SplitTag::Eval).unwrap();

    for base_epochs in [2usize, 4, 8, 12, 20] {
        let cfg = ReplicateConfig {
            base_epochs,
            finetune_factor: factor,
            ..ReplicateConfig::standard(0xC0DE + seed)
        };
        let t0 = std::time::Instant::now();
        let rep = train_replicate(&train_data, &cfg).unwrap();
        let cos_d = mean_pairwise_cosine(&rep.derivative);
        let cos_o = mean_pairwise_cosine(&rep.originative);
        let acc = |m: &ModelParams| accuracy(m, &eval_data).unwrap();
        let deriv: Vec<f64> = rep.derivative.iter().map(acc).collect();
        let orig: Vec<f64> = rep.originative.iter().map(acc).collect();
        println!(
            "base_epochs {base_epochs:>2}: cos_d {cos_d:.4} cos_o {cos_o:.4} | base {:.2} deriv {:?} orig {:?} plain {:.2} | {:.0}s",
            acc(&rep.base),
            deriv.iter().map(|a| (a * 100.0).round() / 100.0).collect::<Vec<_>>(),
            orig.iter().map(|a| (a * 100.0).round() / 100.0).collect::<Vec<_>>(),
            acc(&rep.attacker_plain),
            t0.elapsed().as_secs_f64(),
        );
    }
}
