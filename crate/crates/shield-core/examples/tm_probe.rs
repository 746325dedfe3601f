//! Scratch probe: per-seed replicate health and the non-adaptive transfer
//! rate at the pinned budget. args: seed_list...

use shield_core::attack::AttackConfig;
use shield_core::dataset::{generate_synthetic, SplitTag};
use shield_core::defense::ShieldEnsemble;
use shield_core::harness::{run_shield_tm, train_replicate, HarnessConfig, ReplicateConfig};
use shield_core::nn::{accuracy, ModelParams};
use shield_core::slq::SlqConfig;

fn main() {
    let seeds: Vec<u64> =
        std::env::args().skip(1).map(|s| s.parse().expect("numeric seed")).collect();
    let train_data = generate_synthetic(200, 0x7457, SplitTag::Train).unwrap();
    let eval_data = generate_synthetic(200, 0xE7A1, SplitTag::Eval).unwrap();

    for r in seeds {
        let rep =
            train_replicate(&train_data, &ReplicateConfig::standard(0xC0DE + r)).unwrap();
        let acc = |m: &ModelParams| accuracy(m, &eval_data).unwrap();
        let deriv = ShieldEnsemble::new(
            rep.derivative.clone(),
            SlqConfig::with_default_qualities(0x51 + r),
        )
        .unwrap();
        let cfg = HarnessConfig::new(
            AttackConfig::new(16.0 / 255.0, 20, 0xA7 + r).unwrap(),
            0xE5 + r,
        )
        .unwrap();
        let tm = run_shield_tm(&deriv, &rep.attacker_plain, &eval_data, &cfg).unwrap();
        println!(
            "rep {r}: deriv {:?} plain {:.2} | tm {:.4} (acc {:.3}, clean {:.3})",
            rep.derivative.iter().map(|m| (acc(m) * 100.0).round() / 100.0).collect::<Vec<_>>(),
            acc(&rep.attacker_plain),
            tm.attack_success_rate,
            tm.accuracy,
            tm.clean_accuracy
        );
    }
}
