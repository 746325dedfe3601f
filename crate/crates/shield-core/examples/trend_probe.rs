//! Scratch probe: times replicate training and scenario runs at acceptance
//! scale and prints the trend metrics (cosine ordering, white-box success,
//! severity chain) for one seed.

use std::time::Instant;

use shield_core::attack::AttackConfig;
use shield_core::dataset::{generate_synthetic, SplitTag};
use shield_core::defense::ShieldEnsemble;
use shield_core::harness::{
    run_gray1, run_gray2, run_shield_tm, run_white, train_replicate, HarnessConfig,
    ReplicateConfig,
};
use shield_core::nn::weight_cosine_similarity;
use shield_core::slq::SlqConfig;

fn mean_pairwise_cosine(models: &[shield_core::nn::ModelParams]) -> f64 {
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
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let eval_n: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(100);

    let train_data = generate_synthetic(200, 0x7457 + seed, SplitTag::Train).unwrap();
    let eval_data = generate_synthetic(eval_n, 0xE7A1, SplitTag::Eval).unwrap();

    let t0 = Instant::now();
    let rep = train_replicate(&train_data, &ReplicateConfig::standard(0xC0DE + seed)).unwrap();
    println!("train_replicate: {:.1}s", t0.elapsed().as_secs_f64());

    println!("cosine derivative:  {:.4}", mean_pairwise_cosine(&rep.derivative));
    println!("cosine originative: {:.4}", mean_pairwise_cosine(&rep.originative));

    let slq = SlqConfig::with_default_qualities(0x51);
    let deriv = ShieldEnsemble::new(rep.derivative.clone(), slq.clone()).unwrap();
    let orig = ShieldEnsemble::new(rep.originative.clone(), slq).unwrap();
    let cfg = HarnessConfig::new(
        AttackConfig::new(16.0 / 255.0, 20, 0xA7 + seed).unwrap(),
        0xE5 + seed,
    )
    .unwrap();

    let t = Instant::now();
    let w_d = run_white(&deriv, &eval_data, &cfg).unwrap();
    println!(
        "white derivative:  success {:.3} acc {:.3} clean {:.3}  ({:.1}s)",
        w_d.attack_success_rate,
        w_d.accuracy,
        w_d.clean_accuracy,
        t.elapsed().as_secs_f64()
    );
    let t = Instant::now();
    let w_o = run_white(&orig, &eval_data, &cfg).unwrap();
    println!(
        "white originative: success {:.3} acc {:.3} clean {:.3}  ({:.1}s)",
        w_o.attack_success_rate,
        w_o.accuracy,
        w_o.clean_accuracy,
        t.elapsed().as_secs_f64()
    );

    let t = Instant::now();
    let g1 = run_gray1(&deriv, 2, &eval_data, &cfg).unwrap();
    println!(
        "gray1 n=2: success {:.3} acc {:.3}  ({:.1}s)",
        g1.attack_success_rate,
        g1.accuracy,
        t.elapsed().as_secs_f64()
    );
    let t = Instant::now();
    let g2 = run_gray2(&deriv, &rep.originative, &eval_data, &cfg).unwrap();
    println!(
        "gray2: success {:.3} acc {:.3}  ({:.1}s)",
        g2.attack_success_rate,
        g2.accuracy,
        t.elapsed().as_secs_f64()
    );
    let t = Instant::now();
    let tm = run_shield_tm(&deriv, &rep.attacker_plain, &eval_data, &cfg).unwrap();
    println!(
        "shield-tm: success {:.3} acc {:.3}  ({:.1}s)",
        tm.attack_success_rate,
        tm.accuracy,
        t.elapsed().as_secs_f64()
    );
}
