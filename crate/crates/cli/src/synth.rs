//! `synth`: write synthetic labeled/unlabeled/test splits plus the gold
//! sidecar for the unlabeled pool.

use std::path::PathBuf;

use clap::Args;
use cotrain_core::data::{
    generate_clusters, imbalanced_counts, write_dataset_jsonl, write_gold_sidecar, SyntheticSpec,
};
use cotrain_core::seed::derive_seed;
use cotrain_core::Real;

use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of classes.
    #[arg(long)]
    pub classes: usize,
    /// Feature dimension (must be >= classes).
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Total labeled samples.
    #[arg(long, default_value_t = 100)]
    pub labeled: usize,
    /// Total unlabeled samples.
    #[arg(long, default_value_t = 4000)]
    pub unlabeled: usize,
    /// Total test samples.
    #[arg(long, default_value_t = 1000)]
    pub test: usize,
    /// Samples in the largest class of the unlabeled pool; overrides
    /// --unlabeled with the geometric per-class size formula.
    #[arg(long)]
    pub max: Option<usize>,
    /// Imbalance ratio (largest class over smallest, >= 1).
    #[arg(long, default_value_t = 1.0)]
    pub ir: f64,
    /// Isotropic cluster spread.
    #[arg(long, default_value_t = 0.3)]
    pub spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    if args.classes == 0 {
        return Err(CliError::Usage("--classes must be >= 1".into()));
    }
    if args.dim < args.classes {
        return Err(CliError::Usage("--dim must be >= --classes".into()));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out.display())))?;

    let spec_for = |tag: &str| SyntheticSpec {
        num_classes: args.classes,
        feature_dim: args.dim,
        samples_per_class_max: 1, // replaced per split below
        imbalance_ratio: args.ir,
        cluster_spread: args.spread,
        seed: derive_seed(args.seed, tag),
    };

    let split = |tag: &str, total: usize| -> CliResult<_> {
        let counts = imbalanced_counts(total, args.classes, args.ir);
        if counts.contains(&0) {
            return Err(CliError::Usage(format!(
                "{tag}: {total} samples cannot cover {} classes at imbalance {}",
                args.classes, args.ir
            )));
        }
        let spec = SyntheticSpec {
            samples_per_class_max: counts[0].max(1),
            ..spec_for(tag)
        };
        generate_clusters::<Real>(&spec, &counts, tag).map_err(CliError::from)
    };

    let labeled = split("lab", args.labeled)?;
    let unlabeled = match args.max {
        None => split("unl", args.unlabeled)?,
        Some(max) => {
            let spec = SyntheticSpec { samples_per_class_max: max, ..spec_for("unl") };
            let counts = spec.class_sizes()?;
            generate_clusters::<Real>(&spec, &counts, "unl")?
        }
    };
    let test = split("test", args.test)?;

    write_dataset_jsonl(&args.out.join("labeled.jsonl"), &labeled, true)?;
    write_dataset_jsonl(&args.out.join("unlabeled.jsonl"), &unlabeled, false)?;
    write_dataset_jsonl(&args.out.join("test.jsonl"), &test, true)?;
    write_gold_sidecar(&args.out.join("gold.jsonl"), &unlabeled)?;

    println!(
        "synth: wrote {} labeled, {} unlabeled (+gold sidecar), {} test to {}",
        labeled.len(),
        unlabeled.len(),
        test.len(),
        args.out.display()
    );
    Ok(())
}
