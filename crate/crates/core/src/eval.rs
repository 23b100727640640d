//! Metrics and reporting: error rates, row means, Friedman ranks with tie
//! averaging, and Markdown/CSV report rendering.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::CartographySummary;
use crate::error::{Error, Result};

/// Percentage of mismatched predictions.
pub fn error_rate(predictions: &[usize], gold: &[usize]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("error_rate"));
    }
    if predictions.len() != gold.len() {
        return Err(Error::DimensionMismatch { expected: gold.len(), got: predictions.len() });
    }
    let wrong = predictions.iter().zip(gold).filter(|(p, g)| p != g).count();
    Ok(100.0 * wrong as f64 / predictions.len() as f64)
}

/// Arithmetic mean of a row of error percentages.
pub fn mean_error(row: &[f64]) -> Result<f64> {
    if row.is_empty() {
        return Err(Error::EmptyInput("mean_error"));
    }
    Ok(row.iter().sum::<f64>() / row.len() as f64)
}

/// Rectangular method-by-setup table of error percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    methods: Vec<String>,
    setups: Vec<String>,
    cells: Vec<Vec<f64>>,
}

impl ErrorTable {
    pub fn new(methods: Vec<String>, setups: Vec<String>, cells: Vec<Vec<f64>>) -> Result<Self> {
        if methods.is_empty() || setups.is_empty() {
            return Err(Error::EmptyInput("error table"));
        }
        if cells.len() != methods.len() {
            return Err(Error::DimensionMismatch { expected: methods.len(), got: cells.len() });
        }
        for row in &cells {
            if row.len() != setups.len() {
                return Err(Error::DimensionMismatch { expected: setups.len(), got: row.len() });
            }
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InputOutOfRange("error cells must be finite and >= 0"));
            }
        }
        Ok(Self { methods, setups, cells })
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn setups(&self) -> &[String] {
        &self.setups
    }

    pub fn cell(&self, method: usize, setup: usize) -> f64 {
        self.cells[method][setup]
    }

    pub fn method_row(&self, method: usize) -> &[f64] {
        &self.cells[method]
    }
}

/// Friedman ranking over an error table: each method's mean of its
/// per-setup ranks plus the resulting ordinal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub methods: Vec<String>,
    /// Mean across setups of the method's rank within the setup (ties get
    /// the average of the tied positions).
    pub friedman: Vec<f64>,
    /// Ordinal by ascending Friedman rank; ties broken by method name.
    pub final_rank: Vec<usize>,
}

/// Average-position ranks (1-based) of `values` ascending.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the average of ranks i+1..=j+1
        let average = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = average;
        }
        i = j + 1;
    }
    ranks
}

/// Rank methods per setup (ascending error, tie-averaged) and average
/// across setups.
pub fn friedman_rank(table: &ErrorTable) -> Result<RankReport> {
    let num_methods = table.methods.len();
    let num_setups = table.setups.len();
    let mut sums = vec![0.0f64; num_methods];
    for setup in 0..num_setups {
        let column: Vec<f64> = (0..num_methods).map(|m| table.cell(m, setup)).collect();
        for (sum, rank) in sums.iter_mut().zip(average_ranks(&column)) {
            *sum += rank;
        }
    }
    let friedman: Vec<f64> = sums.into_iter().map(|s| s / num_setups as f64).collect();

    let mut order: Vec<usize> = (0..num_methods).collect();
    order.sort_by(|&a, &b| {
        friedman[a]
            .partial_cmp(&friedman[b])
            .unwrap()
            .then_with(|| table.methods[a].cmp(&table.methods[b]))
    });
    let mut final_rank = vec![0usize; num_methods];
    for (position, &method) in order.iter().enumerate() {
        final_rank[method] = position + 1;
    }

    Ok(RankReport { methods: table.methods.clone(), friedman, final_rank })
}

/// Write an error table as long-form CSV (`method, setup, error`), errors
/// formatted to two decimals.
pub fn write_error_table_csv(path: &Path, table: &ErrorTable) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    writer.write_record(["method", "setup", "error"])?;
    for (m, method) in table.methods.iter().enumerate() {
        for (s, setup) in table.setups.iter().enumerate() {
            writer.write_record([method.as_str(), setup.as_str(), &format!("{:.2}", table.cell(m, s))])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Load a long-form error-table CSV, preserving first-appearance order of
/// methods and setups. The table must be rectangular.
pub fn load_error_table_csv(path: &Path) -> Result<ErrorTable> {
    #[derive(Deserialize)]
    struct Row {
        method: String,
        setup: String,
        error: f64,
    }
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut methods: Vec<String> = Vec::new();
    let mut setups: Vec<String> = Vec::new();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for record in reader.deserialize() {
        let row: Row = record?;
        let m = match methods.iter().position(|x| *x == row.method) {
            Some(i) => i,
            None => {
                methods.push(row.method);
                methods.len() - 1
            }
        };
        let s = match setups.iter().position(|x| *x == row.setup) {
            Some(i) => i,
            None => {
                setups.push(row.setup);
                setups.len() - 1
            }
        };
        entries.push((m, s, row.error));
    }
    if methods.is_empty() {
        return Err(Error::EmptyInput("error table csv"));
    }
    let mut cells = vec![vec![f64::NAN; setups.len()]; methods.len()];
    for (m, s, v) in entries {
        cells[m][s] = v;
    }
    if cells.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::InputOutOfRange("error table csv has missing cells"));
    }
    ErrorTable::new(methods, setups, cells)
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

/// Render the combined report as Markdown: the error table with mean,
/// Friedman rank, and final rank columns, plus a weight-separation section
/// when a cartography summary is supplied.
pub fn render_markdown(
    table: &ErrorTable,
    ranks: &RankReport,
    cartography: Option<&CartographySummary>,
) -> Result<String> {
    if ranks.methods != table.methods {
        return Err(Error::DimensionMismatch {
            expected: table.methods.len(),
            got: ranks.methods.len(),
        });
    }
    let mut out = String::new();
    out.push_str("# Results\n\n");
    out.push_str("| Method |");
    for setup in table.setups() {
        out.push_str(&format!(" {setup} |"));
    }
    out.push_str(" Mean Err. | Friedman Rank | Final Rank |\n");
    out.push_str("|---|");
    for _ in table.setups() {
        out.push_str("---|");
    }
    out.push_str("---|---|---|\n");
    for (m, method) in table.methods().iter().enumerate() {
        out.push_str(&format!("| {method} |"));
        for s in 0..table.setups().len() {
            out.push_str(&format!(" {} |", fmt2(table.cell(m, s))));
        }
        let mean = mean_error(table.method_row(m))?;
        out.push_str(&format!(
            " {} | {} | {} |\n",
            fmt2(mean),
            fmt2(ranks.friedman[m]),
            ranks.final_rank[m]
        ));
    }

    if let Some(summary) = cartography {
        if !summary.models.is_empty() {
            out.push_str("\n## Weight separation\n\n");
            out.push_str("| Model | Scheme | Mean (match) | Mean (mismatch) | AUC |\n");
            out.push_str("|---|---|---|---|---|\n");
            for model in &summary.models {
                let tag = match model.model {
                    crate::dynamics::ModelTag::Model1 => "1",
                    crate::dynamics::ModelTag::Model2 => "2",
                };
                for (scheme, stats) in
                    [("lambda1", &model.lambda1), ("lambda2", &model.lambda2)]
                {
                    let cell = |v: Option<f64>| v.map_or("-".to_string(), fmt2);
                    out.push_str(&format!(
                        "| {tag} | {scheme} | {} | {} | {} |\n",
                        cell(stats.mean_match),
                        cell(stats.mean_mismatch),
                        cell(stats.auc),
                    ));
                }
            }
        }
    }
    Ok(out)
}
