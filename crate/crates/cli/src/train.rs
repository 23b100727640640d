//! `train`: execute one variant and write its run directory (manifest,
//! metrics, checkpoints, cartography CSVs).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use cotrain_core::dynamics::write_cartography_csv;
use cotrain_core::pipeline::{derived_seeds, run_variant, RunInputs, RunOutput, Variant};
use cotrain_core::Real;

use crate::config::{self, ConfigFile, TrainOverrides};
use crate::io::load_inputs;
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training strategy (lg-cotrain, lg-cotrain-cc, singleset, oracle,
    /// st-random, ft-ensembled, vanilla-cotrain, sup-lb, sup-lb-ps).
    #[arg(long)]
    pub variant: String,
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long)]
    pub unlabeled: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Pseudo-label JSONL; required by variants that consume pseudo-labels.
    #[arg(long)]
    pub pseudo: Option<PathBuf>,
    /// Gold sidecar for the unlabeled pool (oracle variant, diagnostics).
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Explicit validation set; otherwise a seeded holdout is used.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Base seed; every random stream in the run derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON config file (flags override it).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    /// Parent directory for the seed-named run directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub output: RunOutput<Real>,
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut out = BufWriter::new(
        File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
    );
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serializing {}: {e}", path.display())))?;
    writeln!(out, "{text}").map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn run(args: &TrainArgs) -> CliResult<TrainOutcome> {
    let variant: Variant = args
        .variant
        .parse()
        .map_err(|e: cotrain_core::Error| CliError::Usage(e.to_string()))?;
    if variant.needs_pseudo_labels() && args.pseudo.is_none() {
        return Err(CliError::Usage(format!(
            "--pseudo is required for variant {variant}"
        )));
    }

    let file_config = args.config.as_ref().map(|p| ConfigFile::load(p)).transpose()?;
    let pipeline_config =
        config::resolve(variant, args.seed, file_config.as_ref(), &args.overrides)?;

    let loaded = load_inputs(
        &args.labeled,
        &args.unlabeled,
        &args.test,
        args.pseudo.as_ref(),
        args.gold.as_ref(),
        args.validation.as_ref(),
    )?;
    let inputs = RunInputs {
        labeled: &loaded.labeled,
        unlabeled: &loaded.unlabeled,
        test: &loaded.test,
        pseudo_labels: loaded.pseudo.as_deref(),
        validation: loaded.validation.as_ref(),
    };

    let output = run_variant(&inputs, &pipeline_config).map_err(CliError::from)?;

    let run_dir = args.out.join(format!("{variant}-seed{}", args.seed));
    std::fs::create_dir_all(&run_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", run_dir.display())))?;

    write_json(&run_dir.join("metrics.json"), &output.metrics)?;

    let manifest = serde_json::json!({
        "variant": variant.to_string(),
        "base_seed": args.seed,
        "config": pipeline_config,
        "derived_seeds": derived_seeds(&pipeline_config)
            .into_iter()
            .collect::<BTreeMap<String, u64>>(),
        "inputs": loaded.digests
            .iter()
            .cloned()
            .collect::<BTreeMap<String, String>>(),
    });
    write_json(&run_dir.join("manifest.json"), &manifest)?;

    for (i, model) in output.models.iter().enumerate() {
        model
            .save_checkpoint(&run_dir.join(format!("model{}.json", i + 1)))
            .map_err(CliError::from)?;
    }
    if let Some(report) = &output.cartography_warmup {
        write_cartography_csv(&run_dir.join("cartography_warmup.csv"), &report.records)
            .map_err(CliError::from)?;
    }
    if let Some(report) = &output.cartography_final {
        write_cartography_csv(&run_dir.join("cartography.csv"), &report.records)
            .map_err(CliError::from)?;
    }

    println!(
        "train: {variant} seed {} -> test error {:.2}% ({})",
        args.seed,
        output.metrics.test_error,
        run_dir.display()
    );
    Ok(TrainOutcome { run_dir, output })
}
