//! `report`: merge run directories into one table plus binned histograms
//! of the cartography weights for external plotting.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use cotrain_core::pipeline::RunMetrics;

use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories (each holding a metrics.json).
    #[arg(long, value_delimiter = ',', required = true)]
    pub runs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

const BIN_WIDTH: f64 = 0.05;
const NUM_BINS: usize = 20;

fn load_metrics(dir: &Path) -> CliResult<RunMetrics> {
    let path = dir.join("metrics.json");
    let file =
        File::open(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn bin_index(value: f64) -> usize {
    // Bin edges 0.0..=1.0 step 0.05; the top edge belongs to the last bin.
    ((value / BIN_WIDTH).floor() as usize).min(NUM_BINS - 1)
}

struct HistogramRow {
    run: String,
    model: String,
    weight: &'static str,
    counts: Vec<usize>,
}

fn cartography_histograms(dir: &Path, run: &str) -> CliResult<Vec<HistogramRow>> {
    let path = dir.join("cartography.csv");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_reader(BufReader::new(
        File::open(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
    ));
    let mut rows: Vec<HistogramRow> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let model = record.get(1).unwrap_or("").to_string();
        for (weight, column) in [("lambda1", 4), ("lambda2", 5)] {
            let value: f64 = record
                .get(column)
                .unwrap_or("")
                .parse()
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let key = (model.clone(), weight);
            let row = match rows
                .iter_mut()
                .find(|r| r.model == key.0 && r.weight == key.1)
            {
                Some(row) => row,
                None => {
                    rows.push(HistogramRow {
                        run: run.to_string(),
                        model: model.clone(),
                        weight,
                        counts: vec![0; NUM_BINS],
                    });
                    rows.last_mut().unwrap()
                }
            };
            row.counts[bin_index(value)] += 1;
        }
    }
    Ok(rows)
}

pub fn run(args: &ReportArgs) -> CliResult<()> {
    let mut entries: Vec<(String, RunMetrics)> = Vec::with_capacity(args.runs.len());
    for dir in &args.runs {
        let metrics = load_metrics(dir)?;
        entries.push((dir.display().to_string(), metrics));
    }
    entries.sort_by(|a, b| {
        (a.1.variant.as_str(), a.1.base_seed).cmp(&(b.1.variant.as_str(), b.1.base_seed))
    });

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out.display())))?;

    let merged_path = args.out.join("merged.csv");
    let mut merged = BufWriter::new(
        File::create(&merged_path).map_err(|e| CliError::Data(e.to_string()))?,
    );
    writeln!(merged, "variant,seed,test_error,n_labeled,n_pseudo,n_test")
        .map_err(|e| CliError::Data(e.to_string()))?;
    for (_, m) in &entries {
        writeln!(
            merged,
            "{},{},{:.2},{},{},{}",
            m.variant, m.base_seed, m.test_error, m.n_labeled, m.n_pseudo, m.n_test
        )
        .map_err(|e| CliError::Data(e.to_string()))?;
    }
    merged.flush().map_err(|e| CliError::Data(e.to_string()))?;

    let mut markdown = String::from("# Merged runs\n\n");
    markdown.push_str("| Variant | Seed | Test Err. | Labeled | Pseudo | Test |\n");
    markdown.push_str("|---|---|---|---|---|---|\n");
    for (_, m) in &entries {
        markdown.push_str(&format!(
            "| {} | {} | {:.2} | {} | {} | {} |\n",
            m.variant, m.base_seed, m.test_error, m.n_labeled, m.n_pseudo, m.n_test
        ));
    }
    std::fs::write(args.out.join("report.md"), &markdown)
        .map_err(|e| CliError::Data(e.to_string()))?;

    // Histograms of the final cartography weights, binned for plotting.
    let mut histogram_rows = Vec::new();
    let mut sorted_dirs: Vec<&PathBuf> = args.runs.iter().collect();
    sorted_dirs.sort();
    for dir in sorted_dirs {
        histogram_rows.extend(cartography_histograms(dir, &dir.display().to_string())?);
    }
    let hist_path = args.out.join("weight_histograms.csv");
    let mut hist = BufWriter::new(
        File::create(&hist_path).map_err(|e| CliError::Data(e.to_string()))?,
    );
    writeln!(hist, "run,model,weight,bin_lo,bin_hi,count")
        .map_err(|e| CliError::Data(e.to_string()))?;
    for row in &histogram_rows {
        for (bin, &count) in row.counts.iter().enumerate() {
            writeln!(
                hist,
                "{},{},{},{:.2},{:.2},{count}",
                row.run,
                row.model,
                row.weight,
                bin as f64 * BIN_WIDTH,
                (bin + 1) as f64 * BIN_WIDTH,
            )
            .map_err(|e| CliError::Data(e.to_string()))?;
        }
    }
    hist.flush().map_err(|e| CliError::Data(e.to_string()))?;

    print!("{markdown}");
    Ok(())
}
