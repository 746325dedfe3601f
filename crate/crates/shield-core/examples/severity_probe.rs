//! Scratch probe: severity chain (white, gray1 n=2, gray2, tm) across eps.
//! args: rep_seed base_epochs

use std::time::Instant;

use shield_core::attack::AttackConfig;
use shield_core::dataset::{generate_synthetic, SplitTag};
use shield_core::defense::ShieldEnsemble;
use shield_core::harness::{
    run_gray1, run_gray2, run_shield_tm, run_white, train_replicate, HarnessConfig,
    ReplicateConfig,
};
use shield_core::slq::SlqConfig;

fn main() {
    let rep_seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let base_epochs: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(4);

    let train_data = generate_synthetic(200, 0x7457, SplitTag::Train).unwrap();
    let eval_data = generate_synthetic(200, 0xE7A1, SplitTag::Eval).unwrap();
    let slq = SlqConfig::with_default_qualities(0x51 + rep_seed);
    let total = Instant::now();

    let rep = train_replicate(
        &train_data,
        &ReplicateConfig { base_epochs, ..ReplicateConfig::standard(0xC0DE + rep_seed) },
    )
    .unwrap();
    println!("rep {rep_seed} base_epochs {base_epochs} trained ({:.0}s)", total.elapsed().as_secs_f64());

    let deriv = ShieldEnsemble::new(rep.derivative.clone(), slq.clone()).unwrap();

    for eps_num in [16.0, 20.0, 24.0, 32.0] {
        let cfg = HarnessConfig::new(
            AttackConfig::new(eps_num / 255.0, 20, 0xA7 + 0x100 + rep_seed).unwrap(),
            0xE5 + rep_seed,
        )
        .unwrap();
        let w = run_white(&deriv, &eval_data, &cfg).unwrap();
        let g1 = run_gray1(&deriv, 2, &eval_data, &cfg).unwrap();
        let g2 = run_gray2(&deriv, &rep.originative, &eval_data, &cfg).unwrap();
        let tm = run_shield_tm(&deriv, &rep.attacker_plain, &eval_data, &cfg).unwrap();
        println!(
            "eps {eps_num:>4}/255: white {:.4} (acc {:.3}) g1n2 {:.4} g2 {:.4} (acc {:.3}) tm {:.4} (acc {:.3}) clean {:.3} ({:.0}s)",
            w.attack_success_rate,
            w.accuracy,
            g1.attack_success_rate,
            g2.attack_success_rate,
            g2.accuracy,
            tm.attack_success_rate,
            tm.accuracy,
            w.clean_accuracy,
            total.elapsed().as_secs_f64()
        );
    }
}
