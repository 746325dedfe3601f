//! Command implementations. Every command prints exactly one JSON object to
//! standard output; progress and diagnostics go to standard error via `log`.

use std::path::{Path, PathBuf};

use serde_json::json;

use shield_core::attack::{
    least_likely_target, pgd_attack, AdversarialRecord, AttackSidecar, Surrogate,
};
use shield_core::dataset::{
    generate_synthetic, read_container, write_container, LabeledDataset, SplitTag,
};
use shield_core::defense::ShieldEnsemble;
use shield_core::harness::{
    curve_to_csv, run_gray1, run_gray2, run_shield_tm, run_white, security_curve, HarnessConfig,
    ScenarioReport,
};
use shield_core::image::PerturbationStats;
use shield_core::nn::{
    accuracy, load_checkpoint, save_checkpoint, train, Init, Lineage, ModelParams, TrainConfig,
};
use shield_core::seeds;
use shield_core::slq::SlqConfig;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn cmd_dataset_gen(count: usize, seed: u64, out: &Path) -> CliResult<()> {
    let data = generate_synthetic(count, seed, SplitTag::Train)?;
    write_container(&data, out)?;
    log::info!("wrote {count} records to {}", out.display());
    println!(
        "{}",
        json!({
            "count": data.len(),
            "class_counts": data.class_counts().to_vec(),
            "out": out.display().to_string(),
        })
    );
    Ok(())
}

/// Seed for one trained model, decorrelated by lineage and quality so a
/// single config drives a whole ensemble script.
fn train_seed(seed: u64, lineage: Lineage, quality: Option<u8>) -> u64 {
    let lineage_tag = match lineage {
        Lineage::Base => 0,
        Lineage::Derivative => 1,
        Lineage::Originative => 2,
    };
    seeds::derive(seed, &[lineage_tag, quality.unwrap_or(0) as u64])
}

pub fn cmd_train(
    config: &RunConfig,
    lineage: Lineage,
    quality: Option<u8>,
    base: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let d = config.dataset()?;
    let t = config.train()?;

    let (init, learning_rate) = match lineage {
        Lineage::Base => {
            if quality.is_some() {
                return Err(CliError::Usage("base training takes no --quality".into()));
            }
            if base.is_some() {
                return Err(CliError::Usage("base training takes no --base".into()));
            }
            (Init::Random, t.learning_rate)
        }
        Lineage::Originative => {
            if quality.is_none() {
                return Err(CliError::Usage("originative training requires --quality".into()));
            }
            (Init::Random, t.learning_rate)
        }
        Lineage::Derivative => {
            if quality.is_none() {
                return Err(CliError::Usage("derivative training requires --quality".into()));
            }
            let path = base.ok_or_else(|| {
                CliError::Usage("derivative training requires --base checkpoint".into())
            })?;
            let params = load_checkpoint(path)?;
            (Init::FromParams(Box::new(params)), t.learning_rate * t.finetune_factor)
        }
    };

    let train_data = generate_synthetic(d.train_count, d.seed, SplitTag::Train)?;
    let eval_data = generate_synthetic(d.eval_count, d.seed, SplitTag::Eval)?;
    let cfg = TrainConfig {
        epochs: t.epochs,
        batch_size: t.batch_size,
        learning_rate,
        momentum: t.momentum,
        seed: train_seed(t.seed, lineage, quality),
        jpeg_quality: quality,
        init,
    };
    log::info!(
        "training {lineage:?} model (quality {quality:?}) on {} images for {} epochs",
        train_data.len(),
        t.epochs
    );
    let params = train(&cfg, &train_data)?;
    save_checkpoint(&params, out)?;
    println!(
        "{}",
        json!({
            "lineage": format!("{lineage:?}").to_lowercase(),
            "quality": quality,
            "train_accuracy": accuracy(&params, &train_data)?,
            "eval_accuracy": accuracy(&params, &eval_data)?,
            "out": out.display().to_string(),
        })
    );
    Ok(())
}

fn load_models(paths: &[PathBuf]) -> CliResult<Vec<ModelParams>> {
    if paths.is_empty() {
        return Err(CliError::Usage("expected at least one checkpoint path".into()));
    }
    paths.iter().map(|p| Ok(load_checkpoint(p)?)).collect()
}

pub fn cmd_attack(
    config: &RunConfig,
    model_paths: &[PathBuf],
    adaptive: bool,
    input: &Path,
    out: &Path,
) -> CliResult<()> {
    let attack_section = config.attack()?;
    let qualities = if adaptive { config.slq()?.qualities.clone() } else { vec![] };
    let models = load_models(model_paths)?;
    let surrogate = Surrogate::new(models.iter().collect(), qualities)?;

    let data = read_container(input)?;
    if data.is_empty() {
        return Err(CliError::Usage(format!("{} holds no records", input.display())));
    }
    let mut cfg = attack_section.to_attack_config();
    cfg.adaptive = adaptive;
    cfg.validate()?;

    log::info!(
        "attacking {} images ({} models, adaptive {adaptive}, eps {:.5})",
        data.len(),
        model_paths.len(),
        cfg.eps
    );
    let mut advs = Vec::with_capacity(data.len());
    let mut records = Vec::with_capacity(data.len());
    for (i, img) in data.images().iter().enumerate() {
        let target = least_likely_target(&surrogate, img)?;
        let adv = pgd_attack(&surrogate, img, target, &cfg.for_image(i as u64))?;
        let stats = PerturbationStats::between(&adv, img)?;
        records.push(AdversarialRecord {
            index: i,
            target_class: target,
            linf: stats.linf,
            l2: stats.l2,
            iterations: cfg.iterations,
        });
        advs.push(adv);
    }

    let adv_data = LabeledDataset::new(advs, data.labels().to_vec(), SplitTag::Eval)?;
    write_container(&adv_data, out)?;
    let sidecar = AttackSidecar { eps: cfg.eps, adaptive, records };
    let sidecar_path = PathBuf::from(format!("{}.json", out.display()));
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", sidecar_path.display())))?;

    let n = sidecar.records.len() as f64;
    println!(
        "{}",
        json!({
            "count": sidecar.records.len(),
            "adaptive": adaptive,
            "eps": cfg.eps,
            "mean_linf": sidecar.records.iter().map(|r| r.linf).sum::<f64>() / n,
            "max_linf": sidecar.records.iter().map(|r| r.linf).fold(0.0, f64::max),
            "out": out.display().to_string(),
            "sidecar": sidecar_path.display().to_string(),
        })
    );
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scenario {
    White,
    Gray1(usize),
    Gray2,
    Shield,
}

impl Scenario {
    pub fn parse(s: &str) -> CliResult<Scenario> {
        match s {
            "white" => Ok(Scenario::White),
            "gray2" => Ok(Scenario::Gray2),
            "shield" => Ok(Scenario::Shield),
            _ => {
                if let Some(n) = s.strip_prefix("gray1:") {
                    let n: usize = n.parse().map_err(|_| {
                        CliError::Usage(format!("bad gray1 model count in scenario \"{s}\""))
                    })?;
                    return Ok(Scenario::Gray1(n));
                }
                Err(CliError::Usage(format!(
                    "unknown scenario \"{s}\" (expected white, gray1:N, gray2, or shield)"
                )))
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    config: &RunConfig,
    scenario: Scenario,
    defender_paths: &[PathBuf],
    proxy_paths: &[PathBuf],
    attacker_path: Option<&Path>,
    report_path: &Path,
    curve: Option<&str>,
    curve_out: Option<&Path>,
) -> CliResult<()> {
    let d = config.dataset()?;
    let slq_section = config.slq()?;
    let eval_seed = config.scenario()?.eval_seed;

    let defender = ShieldEnsemble::new(
        load_models(defender_paths)?,
        SlqConfig::new(slq_section.qualities.clone(), slq_section.seed)?,
    )?;
    let data = generate_synthetic(d.eval_count, d.seed, SplitTag::Eval)?;
    let cfg = HarnessConfig::new(config.attack()?.to_attack_config(), eval_seed)?;

    log::info!("running {scenario:?} on {} images", data.len());
    let report: ScenarioReport = match scenario {
        Scenario::White => run_white(&defender, &data, &cfg)?,
        Scenario::Gray1(n) => run_gray1(&defender, n, &data, &cfg)?,
        Scenario::Gray2 => {
            if proxy_paths.is_empty() {
                return Err(CliError::Usage("gray2 requires --proxies checkpoints".into()));
            }
            run_gray2(&defender, &load_models(proxy_paths)?, &data, &cfg)?
        }
        Scenario::Shield => {
            let path = attacker_path.ok_or_else(|| {
                CliError::Usage("shield scenario requires --attacker checkpoint".into())
            })?;
            run_shield_tm(&defender, &load_checkpoint(path)?, &data, &cfg)?
        }
    };

    let rendered = if config.pretty() {
        serde_json::to_string_pretty(&report)?
    } else {
        serde_json::to_string(&report)?
    };
    std::fs::write(report_path, rendered.as_bytes())
        .map_err(|e| CliError::Io(format!("{}: {e}", report_path.display())))?;

    let curve_path = match curve {
        Some(list) => {
            let eps_list: Vec<f64> = list
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("bad eps value \"{tok}\" in --curve")))
                })
                .collect::<CliResult<_>>()?;
            let rows = security_curve(&defender, &data, &eps_list, &cfg)?;
            let path = curve_out
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(format!("{}.csv", report_path.display())));
            std::fs::write(&path, curve_to_csv(&rows).as_bytes())
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Some(path.display().to_string())
        }
        None => None,
    };

    println!(
        "{}",
        json!({
            "threat_model": serde_json::to_value(&report.threat_model)?,
            "attack_success_rate": report.attack_success_rate,
            "accuracy": report.accuracy,
            "clean_accuracy": report.clean_accuracy,
            "trials": report.trials,
            "report": report_path.display().to_string(),
            "curve": curve_path,
        })
    );
    Ok(())
}
