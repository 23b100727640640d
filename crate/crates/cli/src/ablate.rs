//! `ablate`: run selected variants over selected seeds, aggregate mean and
//! standard deviation per variant, and rank with the Friedman procedure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use cotrain_core::eval::{friedman_rank, render_markdown, write_error_table_csv, ErrorTable};
use cotrain_core::pipeline::{run_variant, RunInputs, Variant};

use crate::config::{self, ConfigFile, TrainOverrides};
use crate::io::load_inputs;
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Comma-separated variant list.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    /// Comma-separated base seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long)]
    pub unlabeled: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub pseudo: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Name of this evaluation setup in the report.
    #[arg(long, default_value = "setup")]
    pub setup_name: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    /// Output directory for report.md, report.csv, and summary.csv.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &AblateArgs) -> CliResult<()> {
    if args.variants.is_empty() {
        return Err(CliError::Usage("--variants must name at least one variant".into()));
    }
    if args.seeds.is_empty() {
        return Err(CliError::Usage("--seeds must name at least one seed".into()));
    }
    let variants: Vec<Variant> = args
        .variants
        .iter()
        .map(|name| name.parse().map_err(|e: cotrain_core::Error| CliError::Usage(e.to_string())))
        .collect::<CliResult<_>>()?;
    for variant in &variants {
        if variant.needs_pseudo_labels() && args.pseudo.is_none() {
            return Err(CliError::Usage(format!("--pseudo is required for variant {variant}")));
        }
    }
    let file_config = args.config.as_ref().map(|p| ConfigFile::load(p)).transpose()?;

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

    let mut means = Vec::with_capacity(variants.len());
    let mut stds = Vec::with_capacity(variants.len());
    for &variant in &variants {
        let mut errors = Vec::with_capacity(args.seeds.len());
        for &seed in &args.seeds {
            let pipeline_config =
                config::resolve(variant, seed, file_config.as_ref(), &args.overrides)?;
            let output = run_variant(&inputs, &pipeline_config).map_err(CliError::from)?;
            errors.push(output.metrics.test_error);
        }
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        let variance =
            errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / errors.len() as f64;
        means.push(mean);
        stds.push(variance.sqrt());
    }

    let table = ErrorTable::new(
        variants.iter().map(ToString::to_string).collect(),
        vec![args.setup_name.clone()],
        means.iter().map(|&m| vec![m]).collect(),
    )
    .map_err(CliError::from)?;
    let ranks = friedman_rank(&table).map_err(CliError::from)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out.display())))?;
    let markdown = render_markdown(&table, &ranks, None).map_err(CliError::from)?;
    std::fs::write(args.out.join("report.md"), &markdown)
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_error_table_csv(&args.out.join("report.csv"), &table).map_err(CliError::from)?;

    let mut summary = BufWriter::new(
        File::create(args.out.join("summary.csv"))
            .map_err(|e| CliError::Data(e.to_string()))?,
    );
    writeln!(summary, "variant,mean_error,std_error,seeds").map_err(|e| CliError::Data(e.to_string()))?;
    for (i, variant) in variants.iter().enumerate() {
        writeln!(summary, "{variant},{:.2},{:.2},{}", means[i], stds[i], args.seeds.len())
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    summary.flush().map_err(|e| CliError::Data(e.to_string()))?;

    print!("{markdown}");
    Ok(())
}
