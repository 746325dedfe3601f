//! The defended pipeline: SLQ preprocessing, then a majority vote over the
//! member models' argmax predictions on the stitched image.
//!
//! One SLQ draw happens per prediction call; the ensemble absorbs the
//! randomness. Vote ties resolve by the higher total softmax mass the
//! ensemble assigns to the tied class, then by the lower class index.

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{self, ModelParams, CLASS_COUNT};
use crate::seeds;
use crate::slq::{slq_preprocess, SlqConfig};

#[derive(Clone, Debug)]
pub struct ShieldEnsemble {
    models: Vec<ModelParams>,
    slq: SlqConfig,
}

impl ShieldEnsemble {
    pub fn new(models: Vec<ModelParams>, slq: SlqConfig) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::invalid("ensemble needs at least one model"));
        }
        for m in &models {
            m.validate()?;
        }
        Ok(ShieldEnsemble { models, slq })
    }

    pub fn models(&self) -> &[ModelParams] {
        &self.models
    }

    pub fn slq(&self) -> &SlqConfig {
        &self.slq
    }

    /// Seed policy for batch evaluation: the SLQ stream of image `index`
    /// depends only on the evaluation seed and the index.
    pub fn call_seed(eval_seed: u64, index: u64) -> u64 {
        seeds::derive(eval_seed, &[0x51ED, index])
    }
}

/// Classify one image: SLQ with the given per-call seed, every model votes
/// its argmax, the modal class wins. Returns the class and the full tally.
pub fn shield_predict(
    e: &ShieldEnsemble,
    img: &Image,
    call_seed: u64,
) -> Result<(usize, [u32; CLASS_COUNT])> {
    let slq = e.slq.reseeded(call_seed);
    let (pre, _) = slq_preprocess(img, &slq)?;

    let mut tally = [0u32; CLASS_COUNT];
    let mut prob_mass = [0.0f64; CLASS_COUNT];
    for m in &e.models {
        let logits = nn::forward(m, &pre)?;
        tally[nn::argmax(&logits)] += 1;
        let probs = nn::softmax(&logits);
        for k in 0..CLASS_COUNT {
            prob_mass[k] += probs[k];
        }
    }

    let top = *tally.iter().max().expect("nonempty tally");
    let mut winner = None;
    for k in 0..CLASS_COUNT {
        if tally[k] != top {
            continue;
        }
        winner = match winner {
            None => Some(k),
            Some(w) if prob_mass[k] > prob_mass[w] => Some(k),
            w => w,
        };
    }
    Ok((winner.expect("some class holds the top tally"), tally))
}

/// Fraction of the dataset shield_predict labels correctly, with per-image
/// call seeds derived from `eval_seed` via the ensemble seed policy.
pub fn shield_accuracy(e: &ShieldEnsemble, data: &LabeledDataset, eval_seed: u64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("cannot score an empty dataset"));
    }
    let mut hits = 0usize;
    for (i, (img, &label)) in data.images().iter().zip(data.labels()).enumerate() {
        let (class, _) = shield_predict(e, img, ShieldEnsemble::call_seed(eval_seed, i as u64))?;
        if class == label as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SplitTag};
    use crate::jpeg::jpeg_round_trip;
    use rand::Rng;

    fn test_image(seed: u64) -> Image {
        let mut rng = seeds::rng(seed, &[0xDEF]);
        Image::from_fn(32, 32, |_, _| rng.random()).unwrap()
    }

    /// Input-independent model whose logits equal `logits` everywhere.
    fn constant_model(logits: [f64; CLASS_COUNT]) -> ModelParams {
        let mut m = ModelParams::zeros();
        m.fc_b = logits.to_vec();
        m
    }

    fn peaked(class: usize, height: f64) -> ModelParams {
        let mut logits = [0.0; CLASS_COUNT];
        logits[class] = height;
        constant_model(logits)
    }

    #[test]
    fn empty_ensemble_is_rejected() {
        assert!(ShieldEnsemble::new(vec![], SlqConfig::with_default_qualities(0)).is_err());
    }

    #[test]
    fn identical_members_vote_unanimously() {
        let m = ModelParams::he_init(1);
        let slq = SlqConfig::with_default_qualities(2);
        let e = ShieldEnsemble::new(vec![m.clone(), m.clone(), m.clone()], slq.clone()).unwrap();
        let img = test_image(3);
        let (class, tally) = shield_predict(&e, &img, 77).unwrap();

        let (pre, _) = slq_preprocess(&img, &slq.reseeded(77)).unwrap();
        let solo = nn::argmax(&nn::forward(&m, &pre).unwrap());
        assert_eq!(class, solo);
        assert_eq!(tally[solo], 3);
        assert_eq!(tally.iter().sum::<u32>(), 3);
    }

    #[test]
    fn two_two_vote_tie_resolves_by_softmax_mass() {
        // Classes 2 and 7 tie at two votes each; the class-7 members are far
        // more confident, so 7 collects more probability mass.
        let e = ShieldEnsemble::new(
            vec![peaked(2, 1.0), peaked(2, 1.0), peaked(7, 10.0), peaked(7, 10.0)],
            SlqConfig::with_default_qualities(4),
        )
        .unwrap();
        let (class, tally) = shield_predict(&e, &test_image(5), 0).unwrap();
        assert_eq!(tally[2], 2);
        assert_eq!(tally[7], 2);
        assert_eq!(class, 7);

        // Swap the confidences and the tie goes the other way.
        let e = ShieldEnsemble::new(
            vec![peaked(2, 10.0), peaked(2, 10.0), peaked(7, 1.0), peaked(7, 1.0)],
            SlqConfig::with_default_qualities(4),
        )
        .unwrap();
        let (class, _) = shield_predict(&e, &test_image(5), 0).unwrap();
        assert_eq!(class, 2);
    }

    #[test]
    fn exact_mass_tie_falls_to_lowest_class() {
        let e = ShieldEnsemble::new(
            vec![peaked(5, 3.0), peaked(3, 3.0)],
            SlqConfig::with_default_qualities(6),
        )
        .unwrap();
        let (class, tally) = shield_predict(&e, &test_image(7), 0).unwrap();
        assert_eq!(tally[3], 1);
        assert_eq!(tally[5], 1);
        assert_eq!(class, 3);
    }

    #[test]
    fn winner_always_holds_a_maximal_tally() {
        for seed in 0..20 {
            let models = vec![
                ModelParams::he_init(seed),
                ModelParams::he_init(seed + 100),
                ModelParams::he_init(seed + 200),
            ];
            let e =
                ShieldEnsemble::new(models, SlqConfig::with_default_qualities(seed)).unwrap();
            let (class, tally) = shield_predict(&e, &test_image(seed), seed).unwrap();
            assert_eq!(tally[class], *tally.iter().max().unwrap());
            assert_eq!(tally.iter().sum::<u32>(), 3);
        }
    }

    #[test]
    fn fixed_call_seed_is_deterministic() {
        let e = ShieldEnsemble::new(
            vec![ModelParams::he_init(8), ModelParams::he_init(9)],
            SlqConfig::with_default_qualities(10),
        )
        .unwrap();
        let img = test_image(11);
        assert_eq!(shield_predict(&e, &img, 42).unwrap(), shield_predict(&e, &img, 42).unwrap());
    }

    #[test]
    fn single_quality_single_model_degenerates_to_plain_compression() {
        let m = ModelParams::he_init(12);
        let slq = SlqConfig::new(vec![55], 13).unwrap();
        let e = ShieldEnsemble::new(vec![m.clone()], slq).unwrap();
        let img = test_image(14);
        let (class, _) = shield_predict(&e, &img, 99).unwrap();
        let plain = nn::argmax(&nn::forward(&m, &jpeg_round_trip(&img, 55).unwrap()).unwrap());
        assert_eq!(class, plain);
    }

    #[test]
    fn accuracy_counts_exact_label_matches() {
        // A constant model always answers 4, so accuracy is the fraction of
        // labels equal to 4.
        let e = ShieldEnsemble::new(
            vec![peaked(4, 2.0)],
            SlqConfig::with_default_qualities(15),
        )
        .unwrap();
        let images: Vec<Image> = (0..5).map(|i| test_image(20 + i)).collect();
        let all_right =
            LabeledDataset::new(images.clone(), vec![4; 5], SplitTag::Eval).unwrap();
        assert_eq!(shield_accuracy(&e, &all_right, 0).unwrap(), 1.0);
        let all_wrong =
            LabeledDataset::new(images.clone(), vec![3; 5], SplitTag::Eval).unwrap();
        assert_eq!(shield_accuracy(&e, &all_wrong, 0).unwrap(), 0.0);
        let two_of_five =
            LabeledDataset::new(images, vec![4, 4, 0, 1, 2], SplitTag::Eval).unwrap();
        assert_eq!(shield_accuracy(&e, &two_of_five, 0).unwrap(), 0.4);
    }

    #[test]
    fn accuracy_matches_per_image_recount() {
        let e = ShieldEnsemble::new(
            vec![ModelParams::he_init(16), ModelParams::he_init(17)],
            SlqConfig::with_default_qualities(18),
        )
        .unwrap();
        let data = generate_synthetic(30, 19, SplitTag::Eval).unwrap();
        let eval_seed = 20;
        let got = shield_accuracy(&e, &data, eval_seed).unwrap();

        let mut hits = 0;
        for i in 0..data.len() {
            let seed = ShieldEnsemble::call_seed(eval_seed, i as u64);
            let (class, _) = shield_predict(&e, &data.images()[i], seed).unwrap();
            if class == data.labels()[i] as usize {
                hits += 1;
            }
        }
        assert_eq!(got, hits as f64 / 30.0);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let e = ShieldEnsemble::new(
            vec![ModelParams::he_init(21)],
            SlqConfig::with_default_qualities(22),
        )
        .unwrap();
        let data = generate_synthetic(5, 23, SplitTag::Eval).unwrap().take_prefix(0);
        assert!(shield_accuracy(&e, &data, 0).is_err());
    }
}
