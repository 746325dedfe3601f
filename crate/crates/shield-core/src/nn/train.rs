//! SGD-with-momentum training, with optional JPEG compression of every
//! training image (the "trained on compressed data" ensemble members).

use rand::seq::SliceRandom;

use super::{argmax, backward_values, cross_entropy_loss, forward, Lineage, ModelParams, ParamGrads};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::jpeg::{jpeg_round_trip, quality_to_table};
use crate::seeds;

/// Where the starting weights come from. `FromParams` fine-tunes an existing
/// model; `Random` draws a fresh initialization from the training seed.
#[derive(Clone, Debug)]
pub enum Init {
    Random,
    FromParams(Box<ModelParams>),
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// When set, every training image is JPEG round-tripped at this quality
    /// before use.
    pub jpeg_quality: Option<u8>,
    pub init: Init,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be finite and nonnegative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if let Some(q) = self.jpeg_quality {
            quality_to_table(q)?;
        }
        if let Init::FromParams(p) = &self.init {
            p.validate()?;
        }
        Ok(())
    }
}

/// Trains a model. Deterministic given the config seed: initialization and
/// epoch shuffles draw from seed-derived streams, batches accumulate in a
/// fixed order. Lineage on the result reflects the config: warm starts are
/// derivative models, random starts are originative when trained on
/// compressed data and base otherwise.
pub fn train(cfg: &TrainConfig, data: &LabeledDataset) -> Result<ModelParams> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }

    let mut params = match &cfg.init {
        Init::Random => ModelParams::he_init(cfg.seed),
        Init::FromParams(base) => (**base).clone(),
    };
    params.lineage = match (&cfg.init, cfg.jpeg_quality) {
        (Init::FromParams(_), _) => Lineage::Derivative,
        (Init::Random, Some(_)) => Lineage::Originative,
        (Init::Random, None) => Lineage::Base,
    };
    params.train_quality = cfg.jpeg_quality;
    params.train_seed = cfg.seed;

    // Compression is deterministic per image, so apply it once up front.
    let inputs: Vec<Vec<f64>> = data
        .images()
        .iter()
        .map(|img| match cfg.jpeg_quality {
            Some(q) => Ok(jpeg_round_trip(img, q)?.data().to_vec()),
            None => Ok(img.data().to_vec()),
        })
        .collect::<Result<_>>()?;

    let mut velocity = ParamGrads::zeros();
    let mut indices: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = seeds::rng(cfg.seed, &[0x5467, epoch as u64]);
        indices.shuffle(&mut rng);
        for batch in indices.chunks(cfg.batch_size) {
            let mut grads = ParamGrads::zeros();
            for &i in batch {
                let logits = super::forward_values(&params, &inputs[i])?;
                let (_, dlogits) = cross_entropy_loss(&logits, data.labels()[i] as usize)?;
                let (g, _) = backward_values(&params, &inputs[i], &dlogits)?;
                grads.add(&g);
            }
            grads.scale(1.0 / batch.len() as f64);
            for (v, g) in velocity.all_arrays_mut().into_iter().zip(grads.all_arrays()) {
                for (v, g) in v.iter_mut().zip(g) {
                    *v = cfg.momentum * *v + g;
                }
            }
            for (p, v) in params.all_arrays_mut().into_iter().zip(velocity.all_arrays()) {
                for (p, v) in p.iter_mut().zip(v) {
                    *p -= cfg.learning_rate * v;
                }
            }
        }
    }
    Ok(params)
}

/// Fraction of images whose argmax prediction equals the label.
pub fn accuracy(p: &ModelParams, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("cannot score an empty dataset"));
    }
    let mut hits = 0usize;
    for (img, &label) in data.images().iter().zip(data.labels()) {
        if argmax(&forward(p, img)?) == label as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}
