//! `label`: produce a pseudo-label JSONL from one of the three sources and
//! print the induced skew.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use cotrain_core::data::load_gold_sidecar;
use cotrain_core::pseudolabel::{
    join_pseudolabels, load_pseudolabels, simulate_oracle, skew_stats, write_pseudolabels,
    NoiseModel, PseudoLabelRecord,
};

use crate::io::dataset;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    /// Simulated noisy labeler over the gold sidecar.
    Oracle,
    /// Pass through (and validate) a precomputed pseudo-label file.
    File,
    /// HTTP prompting endpoint (requires the `endpoint` build feature).
    Endpoint,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long, value_enum)]
    pub source: Source,
    /// Unlabeled pool the labels attach to.
    #[arg(long)]
    pub unlabeled: PathBuf,
    /// Gold sidecar (oracle source).
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Uniform flip rate for the oracle.
    #[arg(long, default_value_t = 0.25)]
    pub rho: f64,
    /// JSON file holding a row-stochastic confusion matrix; overrides --rho.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    /// Precomputed pseudo-label JSONL (file source).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Prompt template JSON (endpoint source).
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Endpoint URL (endpoint source).
    #[arg(long)]
    pub url: Option<String>,
    /// Extra `name:value` request headers.
    #[arg(long)]
    pub header: Vec<String>,
    /// Retries after the first attempt on transport failure.
    #[arg(long, default_value_t = 2)]
    pub retries: usize,
    /// Dot path to the response text field.
    #[arg(long, default_value = "text")]
    pub response_field: String,
    /// Maximum in-flight endpoint requests.
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output pseudo-label JSONL path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &LabelArgs) -> CliResult<()> {
    let unlabeled = dataset(&args.unlabeled)?;
    let records: Vec<PseudoLabelRecord> = match args.source {
        Source::Oracle => {
            let gold_path = args
                .gold
                .as_ref()
                .ok_or_else(|| CliError::Usage("--gold is required for --source oracle".into()))?;
            let sidecar = load_gold_sidecar(gold_path)
                .map_err(|e| CliError::Data(format!("{}: {e}", gold_path.display())))?;
            let gold_ds = unlabeled.with_gold_labels(&sidecar)?;
            let noise = match &args.confusion {
                Some(path) => {
                    let matrix: Vec<Vec<f64>> = serde_json::from_reader(
                        std::fs::File::open(path)
                            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
                    )
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                    NoiseModel::Confusion { matrix }
                }
                None => NoiseModel::UniformFlip { rho: args.rho },
            };
            simulate_oracle(&gold_ds, &noise, args.seed)?
        }
        Source::File => {
            let input = args
                .input
                .as_ref()
                .ok_or_else(|| CliError::Usage("--input is required for --source file".into()))?;
            let records = load_pseudolabels(input, unlabeled.num_classes())
                .map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
            // Validate ids against the pool before passing through.
            join_pseudolabels(&unlabeled, &records)?;
            records
        }
        Source::Endpoint => endpoint_records(args, &unlabeled)?,
    };

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    write_pseudolabels(&args.out, &records)?;

    if records.is_empty() {
        println!("label: wrote 0 records to {}", args.out.display());
    } else {
        let stats = skew_stats(&records, unlabeled.num_classes())?;
        let ratio = match stats.ratio {
            Some(r) => format!("{r:.2}"),
            None => "inf".into(),
        };
        println!(
            "label: wrote {} records to {} (most {}, least {}, skew {ratio})",
            records.len(),
            args.out.display(),
            stats.most_count,
            stats.least_count,
        );
    }
    Ok(())
}

#[cfg(feature = "endpoint")]
fn endpoint_records(
    args: &LabelArgs,
    unlabeled: &cotrain_core::Dataset,
) -> CliResult<Vec<PseudoLabelRecord>> {
    use cotrain_core::pseudolabel::{endpoint_label_all, EndpointConfig, PromptTemplate};

    let template_path = args
        .template
        .as_ref()
        .ok_or_else(|| CliError::Usage("--template is required for --source endpoint".into()))?;
    let url = args
        .url
        .as_ref()
        .ok_or_else(|| CliError::Usage("--url is required for --source endpoint".into()))?;
    let template = PromptTemplate::load(template_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", template_path.display())))?;
    if template.num_classes() != unlabeled.num_classes() {
        return Err(CliError::Data(format!(
            "template covers {} classes but the pool has {}",
            template.num_classes(),
            unlabeled.num_classes()
        )));
    }
    let mut headers = Vec::new();
    for spec in &args.header {
        let (name, value) = spec
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("malformed --header {spec:?} (use name:value)")))?;
        headers.push((name.trim().to_string(), value.trim().to_string()));
    }
    let config = EndpointConfig {
        url: url.clone(),
        headers,
        bearer_token: std::env::var("DWCT_ENDPOINT_KEY").ok(),
        max_retries: args.retries,
        response_field: args.response_field.clone(),
        parallelism: args.parallelism,
        ..Default::default()
    };
    let labeled = endpoint_label_all(&config, &template, unlabeled.examples())?;
    // Unparseable responses were discarded; keep the rest in pool order.
    Ok(labeled.into_iter().flatten().collect())
}

#[cfg(not(feature = "endpoint"))]
fn endpoint_records(
    _args: &LabelArgs,
    _unlabeled: &cotrain_core::Dataset,
) -> CliResult<Vec<PseudoLabelRecord>> {
    Err(CliError::Usage(
        "this build has no endpoint support; rebuild with --features endpoint".into(),
    ))
}
