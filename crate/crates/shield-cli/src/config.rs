//! JSON run configuration. Every section is optional until a command needs
//! it; unknown keys are rejected everywhere, and seeds are always explicit so
//! no run depends on wall-clock state.

use std::path::Path;

use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_EPS: f64 = 16.0 / 255.0;
pub const DEFAULT_ITERATIONS: usize = 20;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<DatasetSection>,
    pub train: Option<TrainSection>,
    pub slq: Option<SlqSection>,
    pub attack: Option<AttackSection>,
    pub scenario: Option<ScenarioSection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default = "default_train_count")]
    pub train_count: usize,
    #[serde(default = "default_eval_count")]
    pub eval_count: usize,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// Learning-rate multiplier when fine-tuning from a base checkpoint.
    #[serde(default = "default_finetune_factor")]
    pub finetune_factor: f64,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlqSection {
    #[serde(default = "default_qualities")]
    pub qualities: Vec<u8>,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Defaults to 2 * eps / iterations when absent.
    pub alpha: Option<f64>,
    #[serde(default = "default_random_start")]
    pub random_start: bool,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub eval_seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Pretty-print report JSON files (stdout summaries are always compact).
    #[serde(default = "default_pretty")]
    pub pretty: bool,
}

fn default_train_count() -> usize {
    200
}
fn default_eval_count() -> usize {
    200
}
fn default_epochs() -> usize {
    20
}
fn default_batch_size() -> usize {
    32
}
fn default_learning_rate() -> f64 {
    0.03
}
fn default_momentum() -> f64 {
    0.9
}
fn default_finetune_factor() -> f64 {
    1.0
}
fn default_qualities() -> Vec<u8> {
    vec![20, 40, 60, 80]
}
fn default_eps() -> f64 {
    DEFAULT_EPS
}
fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}
fn default_random_start() -> bool {
    true
}
fn default_pretty() -> bool {
    true
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn dataset(&self) -> CliResult<&DatasetSection> {
        self.dataset.as_ref().ok_or_else(|| missing("dataset"))
    }

    pub fn train(&self) -> CliResult<&TrainSection> {
        self.train.as_ref().ok_or_else(|| missing("train"))
    }

    pub fn slq(&self) -> CliResult<&SlqSection> {
        self.slq.as_ref().ok_or_else(|| missing("slq"))
    }

    pub fn attack(&self) -> CliResult<&AttackSection> {
        self.attack.as_ref().ok_or_else(|| missing("attack"))
    }

    pub fn scenario(&self) -> CliResult<&ScenarioSection> {
        self.scenario.as_ref().ok_or_else(|| missing("scenario"))
    }

    pub fn pretty(&self) -> bool {
        self.output.as_ref().map_or(default_pretty(), |o| o.pretty)
    }
}

impl AttackSection {
    pub fn to_attack_config(&self) -> shield_core::attack::AttackConfig {
        shield_core::attack::AttackConfig {
            eps: self.eps,
            alpha: self
                .alpha
                .unwrap_or_else(|| 2.0 * self.eps / self.iterations.max(1) as f64),
            iterations: self.iterations,
            random_start: self.random_start,
            seed: self.seed,
            adaptive: true,
        }
    }
}

fn missing(section: &str) -> CliError {
    CliError::Usage(format!(
        "config is missing the \"{section}\" section required by this command (seeds must be explicit)"
    ))
}
