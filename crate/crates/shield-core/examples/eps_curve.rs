//! Scratch probe: targeted and untargeted hit rates against the surrogate
//! objective across perturbation budgets.

use shield_core::attack::{
    least_likely_target, pgd_attack, surrogate_logits, AttackConfig, Surrogate,
};
use shield_core::dataset::{generate_synthetic, SplitTag};
use shield_core::nn::{train, Init, TrainConfig};
use shield_core::slq::DEFAULT_QUALITIES;

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn main() {
    let data = generate_synthetic(200, 0x7457, SplitTag::Train).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 32,
        learning_rate: 0.05,
        momentum: 0.9,
        seed: 11,
        jpeg_quality: Some(60),
        init: Init::Random,
    };
    let model = train(&cfg, &data).unwrap();
    let surrogate = Surrogate::new(vec![&model], DEFAULT_QUALITIES.to_vec()).unwrap();
    let corpus = generate_synthetic(50, 0xBEEF, SplitTag::Eval).unwrap();
    println!(
        "clean accuracy: {:.3}",
        shield_core::nn::accuracy(&model, &corpus).unwrap()
    );

    for eps_num in [8.0, 16.0, 32.0, 64.0, 96.0, 128.0] {
        let eps = eps_num / 255.0;
        let base = AttackConfig::new(eps, 20, 0x5EED).unwrap();
        let mut target_hits = 0;
        let mut label_flips = 0;
        for (i, img) in corpus.images().iter().enumerate() {
            let cfg = base.for_image(i as u64);
            let target = least_likely_target(&surrogate, img).unwrap();
            let adv = pgd_attack(&surrogate, img, target, &cfg).unwrap();
            let pred = argmax(&surrogate_logits(&surrogate, &adv).unwrap());
            if pred == target {
                target_hits += 1;
            }
            if pred != corpus.labels()[i] as usize {
                label_flips += 1;
            }
        }
        println!(
            "eps={eps_num:>5}/255  target_hits={target_hits:>2}/50  label_flips={label_flips:>2}/50"
        );
    }
}
