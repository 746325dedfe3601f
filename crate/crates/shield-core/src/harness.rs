//! Four-scenario evaluation harness.
//!
//! Each scenario fixes what the attacker can see, builds the corresponding
//! surrogate, runs the targeted attack per image, and scores the results
//! against the full defended pipeline:
//!
//! * white: every defender model and the quality set (adaptive);
//! * gray1(n): every n-subset of the defender models, averaged;
//! * gray2: independently trained proxy models, growing prefix per trial;
//! * shield-tm: one plain model, no compression in the gradient path.
//!
//! Attack randomness derives from the attack seed per (trial, image);
//! defender SLQ randomness derives from the separate evaluation seed. Reports
//! echo both so any row can be re-run to bitwise-equal metrics.

use itertools::Itertools;
use serde::Serialize;

use crate::attack::{least_likely_target, pgd_attack, AttackConfig, Surrogate};
use crate::dataset::LabeledDataset;
use crate::defense::{shield_predict, ShieldEnsemble};
use crate::error::{Error, Result};
use crate::image::{Image, PerturbationStats};
use crate::nn::{train, Init, Lineage, ModelParams, TrainConfig};
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThreatModel {
    White,
    Gray1 { exposed: usize },
    Gray2,
    ShieldTm,
}

/// Metrics reported by the original large-scale evaluation of this defense,
/// attached to reports as context. Desk-scale runs reproduce the trends
/// between these numbers, not their magnitudes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LargeScaleReference {
    pub attack_success_rate: f64,
    pub accuracy_under_attack: f64,
    pub clean_accuracy: Option<f64>,
}

fn reference_for(tm: &ThreatModel, defender: &ShieldEnsemble) -> Option<LargeScaleReference> {
    let all = |l: Lineage| defender.models().iter().all(|m| m.lineage == l);
    match tm {
        ThreatModel::White if all(Lineage::Derivative) => Some(LargeScaleReference {
            attack_success_rate: 0.643,
            accuracy_under_attack: 0.017,
            clean_accuracy: None,
        }),
        ThreatModel::White if all(Lineage::Originative) => Some(LargeScaleReference {
            attack_success_rate: 0.489,
            accuracy_under_attack: 0.022,
            clean_accuracy: None,
        }),
        ThreatModel::Gray2 => Some(LargeScaleReference {
            attack_success_rate: 0.000,
            accuracy_under_attack: 0.214,
            clean_accuracy: Some(0.633),
        }),
        ThreatModel::ShieldTm => Some(LargeScaleReference {
            attack_success_rate: 0.0,
            accuracy_under_attack: 0.381,
            clean_accuracy: Some(0.633),
        }),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    /// Which attacker view produced this trial, e.g. "models[0,2]" or
    /// "proxies[0..3]".
    pub id: String,
    pub attack_success_rate: f64,
    pub accuracy: f64,
    /// Accuracy of each defender member alone on this trial's adversarial
    /// images (transfer breakdown; only populated for proxy trials).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub member_accuracy: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerturbationSummary {
    pub mean_linf: f64,
    pub max_linf: f64,
    pub mean_l2: f64,
    pub max_l2: f64,
}

impl PerturbationSummary {
    fn from_stats(stats: &[PerturbationStats]) -> PerturbationSummary {
        let n = stats.len().max(1) as f64;
        PerturbationSummary {
            mean_linf: stats.iter().map(|s| s.linf).sum::<f64>() / n,
            max_linf: stats.iter().map(|s| s.linf).fold(0.0, f64::max),
            mean_l2: stats.iter().map(|s| s.l2).sum::<f64>() / n,
            max_l2: stats.iter().map(|s| s.l2).fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub eps: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub random_start: bool,
    pub adaptive: bool,
    pub qualities: Vec<u8>,
    pub attack_seed: u64,
    pub eval_seed: u64,
    pub images: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub threat_model: ThreatModel,
    pub attack_success_rate: f64,
    /// Defended accuracy on the adversarial images.
    pub accuracy: f64,
    /// Defended accuracy on the same images unattacked, same SLQ draws.
    pub clean_accuracy: f64,
    pub trials: usize,
    pub per_trial: Vec<TrialReport>,
    pub perturbation: PerturbationSummary,
    pub config: ConfigEcho,
    pub reference: Option<LargeScaleReference>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Attack randomness for one scenario run; the evaluation seed drives the
/// defender's SLQ streams and is deliberately separate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnessConfig {
    pub attack: AttackConfig,
    pub eval_seed: u64,
}

impl HarnessConfig {
    pub fn new(attack: AttackConfig, eval_seed: u64) -> Result<Self> {
        attack.validate()?;
        Ok(HarnessConfig { attack, eval_seed })
    }
}

/// Fraction of adversarial images the defender classifies as the attacker's
/// chosen target. Misclassification to any other label does not count.
pub fn attack_success_rate(
    defender: &ShieldEnsemble,
    adv_images: &[Image],
    targets: &[usize],
    eval_seed: u64,
) -> Result<f64> {
    if adv_images.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} adversarial images but {} targets",
            adv_images.len(),
            targets.len()
        )));
    }
    if adv_images.is_empty() {
        return Err(Error::invalid("cannot score an empty adversarial set"));
    }
    let mut hits = 0usize;
    for (i, (img, &target)) in adv_images.iter().zip(targets).enumerate() {
        let (class, _) = shield_predict(defender, img, ShieldEnsemble::call_seed(eval_seed, i as u64))?;
        if class == target {
            hits += 1;
        }
    }
    Ok(hits as f64 / adv_images.len() as f64)
}

/// Defended accuracy against ground-truth labels on arbitrary images, with
/// the same per-image seed policy as attack_success_rate so both metrics see
/// one SLQ draw per image.
fn defended_accuracy(
    defender: &ShieldEnsemble,
    images: &[Image],
    labels: &[u8],
    eval_seed: u64,
) -> Result<f64> {
    let mut hits = 0usize;
    for (i, (img, &label)) in images.iter().zip(labels).enumerate() {
        let (class, _) = shield_predict(defender, img, ShieldEnsemble::call_seed(eval_seed, i as u64))?;
        if class == label as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / images.len().max(1) as f64)
}

struct TrialOutcome {
    report: TrialReport,
    stats: Vec<PerturbationStats>,
}

/// One attack-and-evaluate pass: build the surrogate from the attacker's
/// models, pick least-likely targets per image, attack, score against the
/// full defender. `trial_tags` decorrelate attack seeds across trials.
fn run_trial(
    defender: &ShieldEnsemble,
    attacker_models: &[&ModelParams],
    qualities: &[u8],
    id: String,
    trial_tags: &[u64],
    data: &LabeledDataset,
    cfg: &HarnessConfig,
    member_breakdown: bool,
) -> Result<TrialOutcome> {
    if data.is_empty() {
        return Err(Error::invalid("cannot run a scenario on an empty dataset"));
    }
    let surrogate = Surrogate::new(attacker_models.to_vec(), qualities.to_vec())?;
    let trial_attack = AttackConfig {
        seed: seeds::derive(cfg.attack.seed, trial_tags),
        ..cfg.attack.clone()
    };

    let mut advs = Vec::with_capacity(data.len());
    let mut targets = Vec::with_capacity(data.len());
    let mut stats = Vec::with_capacity(data.len());
    for (i, img) in data.images().iter().enumerate() {
        let target = least_likely_target(&surrogate, img)?;
        let adv = pgd_attack(&surrogate, img, target, &trial_attack.for_image(i as u64))?;
        stats.push(PerturbationStats::between(&adv, img)?);
        advs.push(adv);
        targets.push(target);
    }

    let success = attack_success_rate(defender, &advs, &targets, cfg.eval_seed)?;
    let acc = defended_accuracy(defender, &advs, data.labels(), cfg.eval_seed)?;
    let member_accuracy = if member_breakdown {
        let mut per_member = Vec::with_capacity(defender.models().len());
        for m in defender.models() {
            let ok = advs
                .iter()
                .zip(data.labels())
                .filter(|(img, &label)| {
                    crate::nn::argmax(&crate::nn::forward(m, img).expect("valid image"))
                        == label as usize
                })
                .count();
            per_member.push(ok as f64 / data.len() as f64);
        }
        Some(per_member)
    } else {
        None
    };

    Ok(TrialOutcome {
        report: TrialReport { id, attack_success_rate: success, accuracy: acc, member_accuracy },
        stats,
    })
}

fn subset_id(indices: &[usize]) -> String {
    format!("models[{}]", indices.iter().join(","))
}

fn subset_tags(indices: &[usize]) -> Vec<u64> {
    let mut tags = vec![0x7B1A];
    tags.extend(indices.iter().map(|&i| i as u64));
    tags
}

fn assemble(
    tm: ThreatModel,
    defender: &ShieldEnsemble,
    outcomes: Vec<TrialOutcome>,
    qualities: Vec<u8>,
    data: &LabeledDataset,
    cfg: &HarnessConfig,
    adaptive: bool,
) -> Result<ScenarioReport> {
    let n = outcomes.len() as f64;
    let success = outcomes.iter().map(|o| o.report.attack_success_rate).sum::<f64>() / n;
    let acc = outcomes.iter().map(|o| o.report.accuracy).sum::<f64>() / n;
    let clean = defended_accuracy(defender, data.images(), data.labels(), cfg.eval_seed)?;
    let all_stats: Vec<PerturbationStats> =
        outcomes.iter().flat_map(|o| o.stats.iter().copied()).collect();
    let reference = reference_for(&tm, defender);
    Ok(ScenarioReport {
        threat_model: tm,
        attack_success_rate: success,
        accuracy: acc,
        clean_accuracy: clean,
        trials: outcomes.len(),
        per_trial: outcomes.into_iter().map(|o| o.report).collect(),
        perturbation: PerturbationSummary::from_stats(&all_stats),
        config: ConfigEcho {
            eps: cfg.attack.eps,
            alpha: cfg.attack.alpha,
            iterations: cfg.attack.iterations,
            random_start: cfg.attack.random_start,
            adaptive,
            qualities,
            attack_seed: cfg.attack.seed,
            eval_seed: cfg.eval_seed,
            images: data.len(),
        },
        reference,
    })
}

/// Full knowledge: the surrogate holds every defender model and the complete
/// quality set, gradients routed through the differentiable compression.
pub fn run_white(
    defender: &ShieldEnsemble,
    data: &LabeledDataset,
    cfg: &HarnessConfig,
) -> Result<ScenarioReport> {
    let k = defender.models().len();
    let mut report = run_gray1(defender, k, data, cfg)?;
    report.threat_model = ThreatModel::White;
    report.reference = reference_for(&report.threat_model, defender);
    Ok(report)
}

/// Partial knowledge: every n-subset of the defender models becomes one
/// trial; metrics average over the C(K, n) trials. n = K collapses to the
/// white scenario.
pub fn run_gray1(
    defender: &ShieldEnsemble,
    n: usize,
    data: &LabeledDataset,
    cfg: &HarnessConfig,
) -> Result<ScenarioReport> {
    let k = defender.models().len();
    if n < 1 || n > k {
        return Err(Error::invalid(format!("exposed count {n} outside [1, {k}]")));
    }
    let qualities = defender.slq().qualities().to_vec();
    let mut outcomes = Vec::new();
    for subset in (0..k).combinations(n) {
        let models: Vec<&ModelParams> = subset.iter().map(|&i| &defender.models()[i]).collect();
        outcomes.push(run_trial(
            defender,
            &models,
            &qualities,
            subset_id(&subset),
            &subset_tags(&subset),
            data,
            cfg,
            false,
        )?);
    }
    assemble(ThreatModel::Gray1 { exposed: n }, defender, outcomes, qualities, data, cfg, true)
}

/// No defender access: the attacker trains its own proxy models. Trial t
/// exposes the proxy prefix [0..t]; transfer is scored against the full
/// defender and against each member alone.
pub fn run_gray2(
    defender: &ShieldEnsemble,
    proxies: &[ModelParams],
    data: &LabeledDataset,
    cfg: &HarnessConfig,
) -> Result<ScenarioReport> {
    if proxies.is_empty() {
        return Err(Error::invalid("gray2 needs at least one proxy model"));
    }
    let qualities = defender.slq().qualities().to_vec();
    let mut outcomes = Vec::new();
    for known in 1..=proxies.len() {
        let models: Vec<&ModelParams> = proxies[..known].iter().collect();
        outcomes.push(run_trial(
            defender,
            &models,
            &qualities,
            format!("proxies[0..{known}]"),
            &[0x6EA2, known as u64],
            data,
            cfg,
            true,
        )?);
    }
    assemble(ThreatModel::Gray2, defender, outcomes, qualities, data, cfg, true)
}

/// Defense-unaware attacker: a single plain model with no compression in the
/// gradient path (empty quality list), transferred to the full defender.
pub fn run_shield_tm(
    defender: &ShieldEnsemble,
    attacker_model: &ModelParams,
    data: &LabeledDataset,
    cfg: &HarnessConfig,
) -> Result<ScenarioReport> {
    let outcome = run_trial(
        defender,
        &[attacker_model],
        &[],
        "plain-model".to_string(),
        &[0x571D],
        data,
        cfg,
        false,
    )?;
    assemble(ThreatModel::ShieldTm, defender, vec![outcome], vec![], data, cfg, false)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub eps: f64,
    pub attack_success_rate: f64,
    pub accuracy: f64,
}

/// White-scenario sweep over budgets, rows ordered by eps. The step size
/// rescales with each budget (alpha = 2 eps / iterations).
pub fn security_curve(
    defender: &ShieldEnsemble,
    data: &LabeledDataset,
    eps_list: &[f64],
    cfg: &HarnessConfig,
) -> Result<Vec<CurvePoint>> {
    if eps_list.is_empty() {
        return Err(Error::invalid("eps list must be nonempty"));
    }
    let mut sorted = eps_list.to_vec();
    for &eps in &sorted {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps {eps} must be finite and nonnegative")));
        }
    }
    sorted.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(sorted.len());
    for eps in sorted {
        let attack = AttackConfig {
            eps,
            alpha: 2.0 * eps / cfg.attack.iterations as f64,
            ..cfg.attack.clone()
        };
        let point = run_white(defender, data, &HarnessConfig { attack, eval_seed: cfg.eval_seed })?;
        rows.push(CurvePoint {
            eps,
            attack_success_rate: point.attack_success_rate,
            accuracy: point.accuracy,
        });
    }
    Ok(rows)
}

/// Fixed-point CSV rendering of a security curve.
pub fn curve_to_csv(rows: &[CurvePoint]) -> String {
    let mut out = String::from("eps,attack_success_rate,accuracy\n");
    for r in rows {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6}\n",
            r.eps, r.attack_success_rate, r.accuracy
        ));
    }
    out
}

/// One complete model family trained from a single seed: the shared base,
/// the fine-tuned (derivative) and from-scratch (originative) quality
/// ensembles, and the attacker's plain model for the defense-unaware
/// scenario.
#[derive(Clone, Debug)]
pub struct Replicate {
    pub base: ModelParams,
    pub derivative: Vec<ModelParams>,
    pub originative: Vec<ModelParams>,
    pub attacker_plain: ModelParams,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateConfig {
    pub qualities: Vec<u8>,
    pub epochs: usize,
    /// Epochs spent on the shared base before quality-specific training.
    /// Deliberately smaller than `epochs`: a fully converged base leaves
    /// fine-tuning nothing to do, so the derivative quartet stays a set of
    /// near clones and the exposure effect vanishes.
    pub base_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Scales the fine-tuning step: derivative lr = learning_rate * factor.
    pub finetune_factor: f64,
    pub seed: u64,
}

impl ReplicateConfig {
    pub fn standard(seed: u64) -> Self {
        ReplicateConfig {
            qualities: crate::slq::DEFAULT_QUALITIES.to_vec(),
            epochs: 20,
            base_epochs: 8,
            batch_size: 32,
            learning_rate: 0.03,
            momentum: 0.9,
            finetune_factor: 1.0,
            seed,
        }
    }
}

pub fn train_replicate(data: &LabeledDataset, cfg: &ReplicateConfig) -> Result<Replicate> {
    let train_cfg = |epochs: usize, lr: f64, quality: Option<u8>, init: Init, tags: &[u64]| {
        TrainConfig {
            epochs,
            batch_size: cfg.batch_size,
            learning_rate: lr,
            momentum: cfg.momentum,
            seed: seeds::derive(cfg.seed, tags),
            jpeg_quality: quality,
            init,
        }
    };

    let base = train(
        &train_cfg(cfg.base_epochs, cfg.learning_rate, None, Init::Random, &[1]),
        data,
    )?;
    let mut derivative = Vec::new();
    let mut originative = Vec::new();
    for &q in &cfg.qualities {
        derivative.push(train(
            &train_cfg(
                cfg.epochs,
                cfg.learning_rate * cfg.finetune_factor,
                Some(q),
                Init::FromParams(Box::new(base.clone())),
                &[2, q as u64],
            ),
            data,
        )?);
        originative.push(train(
            &train_cfg(cfg.epochs, cfg.learning_rate, Some(q), Init::Random, &[3, q as u64]),
            data,
        )?);
    }
    let attacker_plain = train(
        &train_cfg(cfg.epochs, cfg.learning_rate, None, Init::Random, &[4]),
        data,
    )?;
    Ok(Replicate { base, derivative, originative, attacker_plain })
}
