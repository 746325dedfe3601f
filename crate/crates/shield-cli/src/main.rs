//! `shield`: dataset generation, JPEG-trained model training, adaptive
//! attacks, and threat-scenario evaluation from one binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
//! 3 internal invariant violation. Standard output carries one JSON object
//! per command; logs go to standard error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use commands::Scenario;
use config::RunConfig;
use error::CliResult;
use shield_core::nn::Lineage;

#[derive(Parser)]
#[command(name = "shield", version, about = "Compression-defense toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic dataset operations.
    Dataset {
        #[command(subcommand)]
        cmd: DatasetCmd,
    },
    /// Train one model and write its checkpoint.
    Train {
        /// JSON run configuration (dataset and train sections).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        lineage: LineageArg,
        /// Training-time JPEG quality; required unless lineage is base.
        #[arg(long)]
        quality: Option<u8>,
        /// Base checkpoint to fine-tune from (derivative lineage only).
        #[arg(long)]
        base: Option<PathBuf>,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Craft targeted adversarial images against a model set.
    Attack {
        /// JSON run configuration (attack section; slq section when adaptive).
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated surrogate checkpoint paths.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<PathBuf>,
        /// Route gradients through the differentiable JPEG set (on) or attack
        /// raw pixels (off).
        #[arg(long, value_enum, default_value = "on")]
        adaptive: Switch,
        /// Input image container.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output container; a JSON sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a threat scenario and write its report.
    Eval {
        /// JSON run configuration (dataset, slq, attack, scenario sections).
        #[arg(long)]
        config: PathBuf,
        /// One of: white, gray1:N, gray2, shield.
        #[arg(long)]
        scenario: String,
        /// Comma-separated defender checkpoint paths.
        #[arg(long, value_delimiter = ',', required = true)]
        defender: Vec<PathBuf>,
        /// Attacker-trained proxy checkpoints (gray2 only).
        #[arg(long, value_delimiter = ',')]
        proxies: Vec<PathBuf>,
        /// Plain attacker checkpoint (shield scenario only).
        #[arg(long)]
        attacker: Option<PathBuf>,
        /// Report JSON output path.
        #[arg(long)]
        report: PathBuf,
        /// Comma-separated eps values; also writes a security-curve CSV.
        #[arg(long)]
        curve: Option<String>,
        /// Curve CSV path (defaults to the report path with .csv appended).
        #[arg(long)]
        curve_out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Generate a labeled synthetic dataset container.
    Gen {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LineageArg {
    Base,
    Derivative,
    Originative,
}

impl From<LineageArg> for Lineage {
    fn from(v: LineageArg) -> Lineage {
        match v {
            LineageArg::Base => Lineage::Base,
            LineageArg::Derivative => Lineage::Derivative,
            LineageArg::Originative => Lineage::Originative,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Command::Dataset { cmd: DatasetCmd::Gen { count, seed, out } } => {
            commands::cmd_dataset_gen(count, seed, &out)
        }
        Command::Train { config, lineage, quality, base, out } => {
            let cfg = RunConfig::load(&config)?;
            commands::cmd_train(&cfg, lineage.into(), quality, base.as_deref(), &out)
        }
        Command::Attack { config, models, adaptive, input, out } => {
            let cfg = RunConfig::load(&config)?;
            commands::cmd_attack(&cfg, &models, matches!(adaptive, Switch::On), &input, &out)
        }
        Command::Eval {
            config,
            scenario,
            defender,
            proxies,
            attacker,
            report,
            curve,
            curve_out,
        } => {
            let cfg = RunConfig::load(&config)?;
            commands::cmd_eval(
                &cfg,
                Scenario::parse(&scenario)?,
                &defender,
                &proxies,
                attacker.as_deref(),
                &report,
                curve.as_deref(),
                curve_out.as_deref(),
            )
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
