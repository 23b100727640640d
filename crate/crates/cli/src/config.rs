//! Configuration resolution: flags > config file > built-in defaults.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use clap::Args;
use cotrain_core::classifier::OptimizerKind;
use cotrain_core::pipeline::{PipelineConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// JSON config file mirroring the tunable run parameters. Every field is
/// optional; present fields override the built-in defaults and are in turn
/// overridden by command-line flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub warmup_epochs: Option<usize>,
    pub cotrain_epochs: Option<usize>,
    pub finetune_epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub l2_reg: Option<f64>,
    pub early_stop_patience: Option<usize>,
    pub optimizer: Option<String>,
    pub init_scale: Option<f64>,
    pub strict_epoch_updates: Option<bool>,
    pub record_extra_pass: Option<bool>,
    pub exchange_threshold: Option<f64>,
    pub validation_fraction: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file = File::open(path)
            .map_err(|e| CliError::Data(format!("cannot open config {}: {e}", path.display())))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| CliError::Data(format!("invalid config {}: {e}", path.display())))
    }
}

/// Hyperparameter flags shared by `train` and `ablate`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainOverrides {
    /// Weight-generation epochs (T).
    #[arg(long)]
    pub warmup_epochs: Option<usize>,
    /// Co-training epochs (E).
    #[arg(long)]
    pub cotrain_epochs: Option<usize>,
    /// Maximum fine-tuning epochs.
    #[arg(long)]
    pub finetune_epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub l2_reg: Option<f64>,
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
    /// Optimizer: `sgd` or `adam`.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    /// One full-batch gradient step per epoch.
    #[arg(long)]
    pub strict_epoch_updates: bool,
    /// Record dynamics in a post-epoch inference pass.
    #[arg(long)]
    pub record_extra_pass: bool,
    /// Confidence gate for the vanilla co-training exchange.
    #[arg(long)]
    pub exchange_threshold: Option<f64>,
    /// Held-out fraction used for early stopping.
    #[arg(long)]
    pub validation_fraction: Option<f64>,
}

fn parse_optimizer(name: &str) -> CliResult<OptimizerKind> {
    match name {
        "sgd" => Ok(OptimizerKind::Sgd),
        "adam" => Ok(OptimizerKind::adam_default()),
        other => Err(CliError::Usage(format!("unknown optimizer {other:?} (sgd or adam)"))),
    }
}

/// Merge defaults, config file, and flags into a resolved pipeline config.
pub fn resolve(
    variant: Variant,
    base_seed: u64,
    file: Option<&ConfigFile>,
    flags: &TrainOverrides,
) -> CliResult<PipelineConfig> {
    let mut config = PipelineConfig { variant, base_seed, ..Default::default() };

    let mut apply = |warmup: Option<usize>,
                     cotrain_epochs: Option<usize>,
                     finetune_epochs: Option<usize>,
                     lr: Option<f64>,
                     batch: Option<usize>,
                     l2: Option<f64>,
                     patience: Option<usize>,
                     optimizer: Option<OptimizerKind>,
                     init_scale: Option<f64>,
                     strict: Option<bool>,
                     extra: Option<bool>,
                     threshold: Option<f64>,
                     val_fraction: Option<f64>| {
        if let Some(v) = warmup {
            config.warmup_epochs = v;
        }
        if let Some(v) = cotrain_epochs {
            config.cotrain_epochs = v;
            config.cotrain.max_epochs = v;
        }
        if let Some(v) = finetune_epochs {
            config.finetune.max_epochs = v;
        }
        if let Some(v) = lr {
            config.cotrain.learning_rate = v;
            config.finetune.learning_rate = v;
        }
        if let Some(v) = batch {
            config.cotrain.batch_size = v;
            config.finetune.batch_size = v;
        }
        if let Some(v) = l2 {
            config.cotrain.l2_reg = v;
            config.finetune.l2_reg = v;
        }
        if let Some(v) = patience {
            config.cotrain.early_stop_patience = v;
            config.finetune.early_stop_patience = v;
        }
        if let Some(v) = optimizer {
            config.cotrain.optimizer = v;
            config.finetune.optimizer = v;
        }
        if let Some(v) = init_scale {
            config.cotrain.init_scale = v;
            config.finetune.init_scale = v;
        }
        if let Some(v) = strict {
            config.strict_epoch_updates = v;
        }
        if let Some(v) = extra {
            config.record_extra_pass = v;
        }
        if let Some(v) = threshold {
            config.exchange_threshold = v;
        }
        if let Some(v) = val_fraction {
            config.validation_fraction = v;
        }
    };

    if let Some(file) = file {
        let optimizer = file.optimizer.as_deref().map(parse_optimizer).transpose()?;
        apply(
            file.warmup_epochs,
            file.cotrain_epochs,
            file.finetune_epochs,
            file.learning_rate,
            file.batch_size,
            file.l2_reg,
            file.early_stop_patience,
            optimizer,
            file.init_scale,
            file.strict_epoch_updates,
            file.record_extra_pass,
            file.exchange_threshold,
            file.validation_fraction,
        );
    }
    let optimizer = flags.optimizer.as_deref().map(parse_optimizer).transpose()?;
    apply(
        flags.warmup_epochs,
        flags.cotrain_epochs,
        flags.finetune_epochs,
        flags.learning_rate,
        flags.batch_size,
        flags.l2_reg,
        flags.early_stop_patience,
        optimizer,
        flags.init_scale,
        flags.strict_epoch_updates.then_some(true),
        flags.record_extra_pass.then_some(true),
        flags.exchange_threshold,
        flags.validation_fraction,
    );

    config.validate().map_err(CliError::from)?;
    Ok(config)
}
