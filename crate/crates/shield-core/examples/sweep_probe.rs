//! Scratch probe: one replicate, chain metrics across eps levels.

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
    let rep_seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let eval_n: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(100);

    let train_data = generate_synthetic(200, 0x7457, SplitTag::Train).unwrap();
    let eval_data = generate_synthetic(eval_n, 0xE7A1, SplitTag::Eval).unwrap();
    let slq = SlqConfig::with_default_qualities(0x51);
    let total = Instant::now();

    let rep = train_replicate(&train_data, &ReplicateConfig::standard(0xC0DE + rep_seed)).unwrap();
    println!(
        "replicate {rep_seed}: cos_deriv {:.4}  cos_orig {:.4}  ({:.0}s)",
        mean_pairwise_cosine(&rep.derivative),
        mean_pairwise_cosine(&rep.originative),
        total.elapsed().as_secs_f64()
    );
    let acc = |m: &ModelParams| shield_core::nn::accuracy(m, &eval_data).unwrap();
    println!(
        "member eval acc: base {:.3} | deriv {:?} | orig {:?} | plain {:.3}",
        acc(&rep.base),
        rep.derivative.iter().map(|m| (acc(m) * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        rep.originative.iter().map(|m| (acc(m) * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        acc(&rep.attacker_plain)
    );
    {
        use shield_core::attack::{least_likely_target, Surrogate};
        let s = Surrogate::new(vec![&rep.attacker_plain], vec![]).unwrap();
        let overlap = eval_data
            .images()
            .iter()
            .zip(eval_data.labels())
            .filter(|(img, &l)| least_likely_target(&s, img).unwrap() == l as usize)
            .count();
        println!(
            "attacker least-likely == true label on {overlap}/{} images",
            eval_data.len()
        );
    }

    let deriv = ShieldEnsemble::new(rep.derivative.clone(), slq.clone()).unwrap();
    let orig = ShieldEnsemble::new(rep.originative.clone(), slq.clone()).unwrap();

    for eps_num in [12.0, 16.0, 24.0, 32.0] {
        let cfg = HarnessConfig::new(
            AttackConfig::new(eps_num / 255.0, 20, 0xA7 + rep_seed).unwrap(),
            0xE5 + rep_seed,
        )
        .unwrap();
        let w_d = run_white(&deriv, &eval_data, &cfg).unwrap();
        let w_o = run_white(&orig, &eval_data, &cfg).unwrap();
        let g1 = run_gray1(&deriv, 2, &eval_data, &cfg).unwrap();
        let g2 = run_gray2(&deriv, &rep.originative, &eval_data, &cfg).unwrap();
        let tm = run_shield_tm(&deriv, &rep.attacker_plain, &eval_data, &cfg).unwrap();
        println!(
            "eps {eps_num:>4}/255: white_d {:.3} (acc {:.3}) | white_o {:.3} | g1n2 {:.3} | g2 {:.3} | tm {:.3} (acc {:.3}) | clean {:.3} ({:.0}s)",
            w_d.attack_success_rate,
            w_d.accuracy,
            w_o.attack_success_rate,
            g1.attack_success_rate,
            g2.attack_success_rate,
            tm.attack_success_rate,
            tm.accuracy,
            w_d.clean_accuracy,
            total.elapsed().as_secs_f64()
        );
    }
}
