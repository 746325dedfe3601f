//! Scratch probe: the full acceptance evidence block for one replicate at
//! the pinned budget, using the acceptance suite's exact seeds.
//! args: rep_seed base_epochs [finetune_factor]

use std::time::Instant;

use shield_core::attack::AttackConfig;
use shield_core::dataset::{generate_synthetic, SplitTag};
use shield_core::defense::ShieldEnsemble;
use shield_core::harness::{
    run_gray1, run_gray2, run_shield_tm, run_white, train_replicate, HarnessConfig,
    ReplicateConfig,
};
use shield_core::nn::{accuracy, weight_cosine_similarity, ModelParams};
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
    let r: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let base_epochs: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(4);
    let factor: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let pinned = 16.0 / 255.0;

    let train_data = generate_synthetic(200, 0x7457, SplitTag::Train).unwrap();
    let eval_data = generate_synthetic(200, 0xE7A1, SplitTag::Eval).unwrap();
    let slq = SlqConfig::with_default_qualities(0x51 + r);
    let total = Instant::now();

    let rep = train_replicate(
        &train_data,
        &ReplicateConfig {
            base_epochs,
            finetune_factor: factor,
            ..ReplicateConfig::standard(0xC0DE + r)
        },
    )
    .unwrap();
    let acc = |m: &ModelParams| accuracy(m, &eval_data).unwrap();
    println!(
        "rep {r} base_epochs {base_epochs} factor {factor}: cos_d {:.4} cos_o {:.4} | deriv {:?} plain {:.2} ({:.0}s)",
        mean_pairwise_cosine(&rep.derivative),
        mean_pairwise_cosine(&rep.originative),
        rep.derivative.iter().map(|m| (acc(m) * 100.0).round() / 100.0).collect::<Vec<_>>(),
        acc(&rep.attacker_plain),
        total.elapsed().as_secs_f64()
    );

    let deriv = ShieldEnsemble::new(rep.derivative.clone(), slq.clone()).unwrap();
    let orig = ShieldEnsemble::new(rep.originative.clone(), slq.clone()).unwrap();
    let cfg = HarnessConfig::new(
        AttackConfig::new(pinned, 20, 0xA7 + r).unwrap(),
        0xE5 + r,
    )
    .unwrap();

    let w_d = run_white(&deriv, &eval_data, &cfg).unwrap();
    let w_o = run_white(&orig, &eval_data, &cfg).unwrap();
    println!(
        "white_d {:.4} (acc {:.3}) white_o {:.4} clean {:.3} ({:.0}s)",
        w_d.attack_success_rate,
        w_d.accuracy,
        w_o.attack_success_rate,
        w_d.clean_accuracy,
        total.elapsed().as_secs_f64()
    );
    let mut curve = vec![];
    for n in 1..=3usize {
        let g = run_gray1(&deriv, n, &eval_data, &cfg).unwrap();
        println!(
            "gray1 n={n}: {:.4} (acc {:.3}) ({:.0}s)",
            g.attack_success_rate,
            g.accuracy,
            total.elapsed().as_secs_f64()
        );
        curve.push(g.attack_success_rate);
    }
    curve.push(w_d.attack_success_rate);
    let g2 = run_gray2(&deriv, &rep.originative, &eval_data, &cfg).unwrap();
    let tm = run_shield_tm(&deriv, &rep.attacker_plain, &eval_data, &cfg).unwrap();
    println!(
        "summary rep {r}: curve {:?} | white {:.4} >= g1n2 {:.4} >= g2 {:.4}; tm {:.4} (acc {:.3} vs white acc {:.3}) ({:.0}s)",
        curve.iter().map(|s| (s * 1e4).round() / 1e4).collect::<Vec<_>>(),
        w_d.attack_success_rate,
        curve[1],
        g2.attack_success_rate,
        tm.attack_success_rate,
        tm.accuracy,
        w_d.accuracy,
        total.elapsed().as_secs_f64()
    );
}
