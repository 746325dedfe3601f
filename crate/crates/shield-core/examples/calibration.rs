//! Scratch probe: acceptance-scale dry run over five seed replicates.
//! Prints one JSON object per line so trend counts can be tabulated before
//! the thresholds are frozen into the acceptance suite.

use std::time::Instant;

use shield_core::attack::AttackConfig;
use shield_core::dataset::{generate_synthetic, SplitTag};
use shield_core::defense::ShieldEnsemble;
use shield_core::harness::{
    run_gray1, run_gray2, run_shield_tm, run_white, train_replicate, HarnessConfig,
    ReplicateConfig,
};
use shield_core::nn::{weight_cosine_similarity, ModelParams};
use shield_core::slq::SlqConfig;

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
    let replicates: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let eval_n: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(200);

    let train_data = generate_synthetic(200, 0x7457, SplitTag::Train).unwrap();
    let eval_data = generate_synthetic(eval_n, 0xE7A1, SplitTag::Eval).unwrap();
    let slq = SlqConfig::with_default_qualities(0x51);
    let total = Instant::now();

    for r in 0..replicates {
        let t0 = Instant::now();
        let rep = train_replicate(&train_data, &ReplicateConfig::standard(0xC0DE + r)).unwrap();
        let train_secs = t0.elapsed().as_secs_f64();

        let deriv = ShieldEnsemble::new(rep.derivative.clone(), slq.clone()).unwrap();
        let orig = ShieldEnsemble::new(rep.originative.clone(), slq.clone()).unwrap();
        let cfg = HarnessConfig::new(
            AttackConfig::new(16.0 / 255.0, 20, 0xA7 + r).unwrap(),
            0xE5 + r,
        )
        .unwrap();

        let w_d = run_white(&deriv, &eval_data, &cfg).unwrap();
        let w_o = run_white(&orig, &eval_data, &cfg).unwrap();
        let g1 = run_gray1(&deriv, 2, &eval_data, &cfg).unwrap();
        let g2 = run_gray2(&deriv, &rep.originative, &eval_data, &cfg).unwrap();
        let tm = run_shield_tm(&deriv, &rep.attacker_plain, &eval_data, &cfg).unwrap();

        println!(
            "{{\"replicate\":{r},\"train_secs\":{train_secs:.1},\
             \"cos_deriv\":{:.4},\"cos_orig\":{:.4},\
             \"white_deriv\":{:.4},\"white_orig\":{:.4},\
             \"acc_white_deriv\":{:.4},\"acc_white_orig\":{:.4},\"clean_deriv\":{:.4},\
             \"gray1n2\":{:.4},\"acc_gray1n2\":{:.4},\
             \"gray2\":{:.4},\"acc_gray2\":{:.4},\
             \"tm\":{:.4},\"acc_tm\":{:.4},\
             \"max_linf\":{:.6},\"elapsed\":{:.1}}}",
            mean_pairwise_cosine(&rep.derivative),
            mean_pairwise_cosine(&rep.originative),
            w_d.attack_success_rate,
            w_o.attack_success_rate,
            w_d.accuracy,
            w_o.accuracy,
            w_d.clean_accuracy,
            g1.attack_success_rate,
            g1.accuracy,
            g2.attack_success_rate,
            g2.accuracy,
            tm.attack_success_rate,
            tm.accuracy,
            w_d.perturbation.max_linf.max(g1.perturbation.max_linf),
            total.elapsed().as_secs_f64(),
        );
    }

    // Gray1 monotonicity over n on replicate 0's derivative ensemble.
    let rep = train_replicate(&train_data, &ReplicateConfig::standard(0xC0DE)).unwrap();
    let deriv = ShieldEnsemble::new(rep.derivative, slq).unwrap();
    let cfg =
        HarnessConfig::new(AttackConfig::new(16.0 / 255.0, 20, 0xA7).unwrap(), 0xE5).unwrap();
    let mut succ = Vec::new();
    for n in 1..=4 {
        let g = run_gray1(&deriv, n, &eval_data, &cfg).unwrap();
        succ.push(g.attack_success_rate);
    }
    println!(
        "{{\"gray1_curve\":[{:.4},{:.4},{:.4},{:.4}],\"total_secs\":{:.1}}}",
        succ[0],
        succ[1],
        succ[2],
        succ[3],
        total.elapsed().as_secs_f64()
    );
}
