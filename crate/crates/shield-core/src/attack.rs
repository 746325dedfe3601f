//! Targeted PGD and FGM against a differentiable ensemble surrogate.
//!
//! The surrogate averages logits over every (model, quality) pair, routing
//! each quality through the differentiable JPEG approximation; with an empty
//! quality list the models see raw pixels (the non-adaptive attacker). The
//! attack loss is softmax cross-entropy on the averaged logits, and the
//! iterate is projected back into the l-infinity ball after every step.

use serde::{Deserialize, Serialize};

use crate::diffjpeg::{diff_jpeg_forward_raw, diff_jpeg_vjp};
use crate::error::{Error, Result};
use crate::image::{Image, Plane};
use crate::jpeg::quality_to_table;
use crate::nn::{self, ModelParams, CLASS_COUNT};
use crate::seeds;
use rand::Rng;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackConfig {
    /// l-infinity budget in [0,1] pixel scale.
    pub eps: f64,
    /// Per-iteration step size.
    pub alpha: f64,
    pub iterations: usize,
    pub random_start: bool,
    pub seed: u64,
    /// Route gradients through the differentiable JPEG set (true) or attack
    /// raw pixels (false).
    pub adaptive: bool,
}

impl AttackConfig {
    pub const DEFAULT_EPS: f64 = 16.0 / 255.0;
    pub const DEFAULT_ITERATIONS: usize = 20;

    /// Standard schedule: alpha = 2*eps/iterations, random start, adaptive.
    pub fn new(eps: f64, iterations: usize, seed: u64) -> Result<Self> {
        let cfg = AttackConfig {
            eps,
            alpha: if iterations > 0 { 2.0 * eps / iterations as f64 } else { 0.0 },
            iterations,
            random_start: true,
            seed,
            adaptive: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid(format!("eps {} must be finite and nonnegative", self.eps)));
        }
        // A zero-radius ball collapses every step, so alpha only matters for
        // a positive budget.
        if self.eps > 0.0 && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha {} must be positive", self.alpha)));
        }
        if self.iterations < 1 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        Ok(())
    }

    /// Config for one image of a batch: same schedule, decorrelated stream.
    pub fn for_image(&self, index: u64) -> AttackConfig {
        AttackConfig { seed: seeds::derive(self.seed, &[0xA77C, index]), ..self.clone() }
    }
}

/// The attacker's view of the defense: some models (borrowed checkpoints) and
/// the quality set to average over. All models share the fixed architecture;
/// an empty quality list means no compression in the loss path.
#[derive(Clone, Debug)]
pub struct Surrogate<'a> {
    models: Vec<&'a ModelParams>,
    qualities: Vec<u8>,
}

impl<'a> Surrogate<'a> {
    pub fn new(models: Vec<&'a ModelParams>, qualities: Vec<u8>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::invalid("surrogate needs at least one model"));
        }
        for m in &models {
            m.validate()?;
        }
        for &q in &qualities {
            quality_to_table(q)?;
        }
        Ok(Surrogate { models, qualities })
    }

    pub fn models(&self) -> &[&'a ModelParams] {
        &self.models
    }

    pub fn qualities(&self) -> &[u8] {
        &self.qualities
    }

    fn pair_count(&self) -> usize {
        self.models.len() * self.qualities.len().max(1)
    }
}

/// Mean logits over all (model, quality) pairs. The compression path uses the
/// pre-clamp surrogate output so these logits are exactly the function the
/// gradient differentiates.
pub fn surrogate_logits(s: &Surrogate, img: &Image) -> Result<[f64; CLASS_COUNT]> {
    let mut acc = [0.0; CLASS_COUNT];
    if s.qualities.is_empty() {
        for m in &s.models {
            add(&mut acc, &nn::forward(m, img)?);
        }
    } else {
        for &q in &s.qualities {
            let plane = diff_jpeg_forward_raw(img, q)?;
            for m in &s.models {
                add(&mut acc, &nn::forward_values(m, &plane.data)?);
            }
        }
    }
    let n = s.pair_count() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    Ok(acc)
}

fn add(acc: &mut [f64; CLASS_COUNT], v: &[f64; CLASS_COUNT]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Gradient of cross_entropy(surrogate_logits(img), target) with respect to
/// the image pixels. One forward per (model, quality) pair; its trace feeds
/// both the averaged logits and the reverse pass.
pub fn surrogate_grad(s: &Surrogate, img: &Image, target: usize) -> Result<Plane> {
    let planes: Vec<Plane> = if s.qualities.is_empty() {
        vec![Plane::from_image(img)]
    } else {
        s.qualities.iter().map(|&q| diff_jpeg_forward_raw(img, q)).collect::<Result<_>>()?
    };
    let mut traces = Vec::with_capacity(planes.len() * s.models.len());
    let mut acc = [0.0; CLASS_COUNT];
    for plane in &planes {
        for m in &s.models {
            let trace = nn::forward_trace(m, &plane.data)?;
            add(&mut acc, &trace.logits);
            traces.push(trace);
        }
    }
    let n = s.pair_count() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    let (_, mut dlogits) = nn::cross_entropy_loss(&acc, target)?;
    dlogits.iter_mut().for_each(|v| *v /= n);

    let mut grad = Plane::zeros(img.height(), img.width());
    let mut traces = traces.iter();
    for pi in 0..planes.len() {
        // One vjp per quality: input cotangents of all models sum first (the
        // vjp is linear in its cotangent).
        let mut cot = Plane::zeros(img.height(), img.width());
        for m in &s.models {
            let trace = traces.next().expect("one trace per pair");
            let (_, g) = nn::backward_from_trace(m, trace, &dlogits);
            for (a, b) in cot.data.iter_mut().zip(&g) {
                *a += b;
            }
        }
        if s.qualities.is_empty() {
            grad = cot;
        } else {
            let g = diff_jpeg_vjp(img, s.qualities[pi], &cot)?;
            for (a, b) in grad.data.iter_mut().zip(&g.data) {
                *a += b;
            }
        }
    }
    Ok(grad)
}

/// The class with the lowest surrogate logit on the clean image; ties break
/// toward the lowest class index.
pub fn least_likely_target(s: &Surrogate, img: &Image) -> Result<usize> {
    let logits = surrogate_logits(s, img)?;
    let mut best = 0;
    for (k, &l) in logits.iter().enumerate() {
        if l < logits[best] {
            best = k;
        }
    }
    Ok(best)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Ball projection on a raw (possibly out-of-range) iterate.
fn project_raw(raw: &[f64], orig: &Image, eps: f64) -> Image {
    let data = raw
        .iter()
        .zip(orig.data())
        .map(|(&v, &o)| v.clamp(o - eps, o + eps).clamp(0.0, 1.0))
        .collect();
    Image::from_vec_unchecked(orig.height(), orig.width(), data)
}

/// The PGD core over an arbitrary gradient function: optional uniform random
/// start in the ball, then `iterations` signed-gradient descent steps, each
/// followed by projection onto the ball and the valid pixel range.
pub fn pgd_with_gradient(
    img: &Image,
    cfg: &AttackConfig,
    mut grad_fn: impl FnMut(&Image) -> Result<Plane>,
) -> Result<Image> {
    cfg.validate()?;
    let mut x = if cfg.random_start && cfg.eps > 0.0 {
        let mut rng = seeds::rng(cfg.seed, &[0x9D57]);
        let noisy: Vec<f64> = img
            .data()
            .iter()
            .map(|v| v + (rng.random::<f64>() * 2.0 - 1.0) * cfg.eps)
            .collect();
        project_raw(&noisy, img, cfg.eps)
    } else {
        img.clone()
    };
    for _ in 0..cfg.iterations {
        let g = grad_fn(&x)?;
        if !g.same_dims_as_image(img) {
            return Err(Error::shape(format!(
                "gradient {}x{} does not match image {}x{}",
                g.height,
                g.width,
                img.height(),
                img.width()
            )));
        }
        let stepped: Vec<f64> = x
            .data()
            .iter()
            .zip(&g.data)
            .map(|(v, g)| v - cfg.alpha * sign(*g))
            .collect();
        x = project_raw(&stepped, img, cfg.eps);
    }
    Ok(x)
}

/// Targeted PGD against the surrogate: descends the cross-entropy toward the
/// target class. Output satisfies the l-infinity budget exactly and stays in
/// [0,1]; deterministic given the config seed.
pub fn pgd_attack(s: &Surrogate, img: &Image, target: usize, cfg: &AttackConfig) -> Result<Image> {
    if target >= CLASS_COUNT {
        return Err(Error::invalid(format!("target class {target} outside [0, 9]")));
    }
    pgd_with_gradient(img, cfg, |x| surrogate_grad(s, x, target))
}

/// Fast gradient method: a single signed step of size eps from the clean
/// image. Equivalent to PGD with one iteration, alpha = eps, no random start.
pub fn fgm_attack(s: &Surrogate, img: &Image, target: usize, cfg: &AttackConfig) -> Result<Image> {
    if target >= CLASS_COUNT {
        return Err(Error::invalid(format!("target class {target} outside [0, 9]")));
    }
    let single = AttackConfig {
        alpha: cfg.eps,
        iterations: 1,
        random_start: false,
        ..cfg.clone()
    };
    pgd_with_gradient(img, &single, |x| surrogate_grad(s, x, target))
}

/// Per-image entry of the attack sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialRecord {
    pub index: usize,
    pub target_class: usize,
    pub linf: f64,
    pub l2: f64,
    pub iterations: usize,
}

/// JSON sidecar accompanying an adversarial container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSidecar {
    pub eps: f64,
    pub adaptive: bool,
    pub records: Vec<AdversarialRecord>,
}
