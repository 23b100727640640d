//! Training-dynamics bookkeeping and the per-sample weighting math.
//!
//! Each model keeps a probability history: one row per recorded epoch, one
//! column per pseudo-labeled sample, holding the probability the model
//! assigned to that sample's label at that epoch. From a column we derive
//! confidence (the mean), variability (the population standard deviation),
//! and the asymmetric importance weights `lambda1 = c + v` and
//! `lambda2 = c - v`, clamped into `[0, 1]`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Append-only per-epoch record of `p(label | x; theta)` for every tracked
/// sample. Row `t` is epoch `t`; all rows share one length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbabilityHistory<S> {
    rows: Vec<Vec<S>>,
}

impl<S: Scalar> ProbabilityHistory<S> {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    /// Number of recorded epochs.
    pub fn num_epochs(&self) -> usize {
        self.rows.len()
    }

    /// Number of tracked samples (0 before the first row).
    pub fn num_samples(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.rows
    }

    pub fn last_row(&self) -> Option<&[S]> {
        self.rows.last().map(Vec::as_slice)
    }

    /// Append one epoch of probabilities. The first row fixes the sample
    /// count; every entry must lie in `[0, 1]`.
    pub fn record_epoch(&mut self, probs: Vec<S>) -> Result<()> {
        if let Some(first) = self.rows.first() {
            if probs.len() != first.len() {
                return Err(Error::HistoryLengthMismatch {
                    expected: first.len(),
                    got: probs.len(),
                });
            }
        }
        for &p in &probs {
            if !(p >= S::zero() && p <= S::one()) {
                return Err(Error::ProbabilityOutOfRange(p.to_f64_lossy()));
            }
        }
        self.rows.push(probs);
        Ok(())
    }

    /// History containing only this one's final row; the starting point for
    /// a fresh training stage that keeps the last snapshot as its baseline.
    pub fn restarted_from_last_row(&self) -> Result<Self> {
        let last = self
            .rows
            .last()
            .ok_or(Error::EmptyInput("restarted_from_last_row"))?;
        Ok(Self { rows: vec![last.clone()] })
    }

    fn column(&self, index: usize) -> Result<impl Iterator<Item = S> + '_> {
        if self.rows.is_empty() {
            return Err(Error::EmptyInput("probability history"));
        }
        if index >= self.num_samples() {
            return Err(Error::DimensionMismatch {
                expected: self.num_samples(),
                got: index,
            });
        }
        Ok(self.rows.iter().map(move |row| row[index]))
    }

    /// Mean of sample `index`'s recorded probabilities.
    pub fn confidence(&self, index: usize) -> Result<S> {
        let epochs = S::cast(self.num_epochs() as f64);
        let sum = self.column(index)?.sum::<S>();
        // Means of values in [0, 1] stay in [0, 1]; clamp float drift.
        Ok((sum / epochs).min(S::one()).max(S::zero()))
    }

    /// Population standard deviation (divide by the epoch count) of sample
    /// `index`'s recorded probabilities.
    pub fn variability(&self, index: usize) -> Result<S> {
        let mean = self.confidence(index)?;
        let epochs = S::cast(self.num_epochs() as f64);
        let sum_sq = self.column(index)?.map(|p| (p - mean) * (p - mean)).sum::<S>();
        // Values in [0, 1] have standard deviation at most 0.5; clamp drift.
        Ok((sum_sq / epochs).sqrt().min(S::cast(0.5)))
    }

    /// Weight pairs for every tracked sample.
    pub fn weight_pairs(&self, mode: WeightMode) -> Result<Vec<WeightPair<S>>> {
        (0..self.num_samples())
            .map(|i| {
                let c = self.confidence(i)?;
                let v = match mode {
                    WeightMode::ConfidenceVariability => self.variability(i)?,
                    WeightMode::ConfidenceOnly => S::zero(),
                };
                lambda_weights(c, v)
            })
            .collect()
    }
}

/// Whether variability participates in the weights. `ConfidenceOnly`
/// collapses both schemes onto the plain confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    ConfidenceVariability,
    ConfidenceOnly,
}

/// Per-sample importance weights with their provenance. The raw values keep
/// the algebraic identities (`raw sum = 2c`, `raw difference = 2v`) visible
/// even where clamping changed the applied weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPair<S> {
    pub lambda1: S,
    pub lambda2: S,
    pub lambda1_raw: S,
    pub lambda2_raw: S,
    pub confidence: S,
    pub variability: S,
}

/// `lambda1 = clamp(c + v)`, `lambda2 = clamp(c - v)`. Clamping keeps the
/// semantics at "down-weight, never anti-weight": a negative loss weight
/// would invert a sample's gradient.
pub fn lambda_weights<S: Scalar>(confidence: S, variability: S) -> Result<WeightPair<S>> {
    if !(confidence >= S::zero() && confidence <= S::one()) {
        return Err(Error::InputOutOfRange("confidence must be in [0, 1]"));
    }
    if !(variability >= S::zero() && variability <= S::cast(0.5)) {
        return Err(Error::InputOutOfRange("variability must be in [0, 0.5]"));
    }
    let lambda1_raw = confidence + variability;
    let lambda2_raw = confidence - variability;
    Ok(WeightPair {
        lambda1: lambda1_raw.min(S::one()).max(S::zero()),
        lambda2: lambda2_raw.min(S::one()).max(S::zero()),
        lambda1_raw,
        lambda2_raw,
        confidence,
        variability,
    })
}

/// Divergence between the two weighting schemes: `lambda1_raw -
/// lambda2_raw`, which is `2 * variability` by construction.
pub fn delta_lambda<S: Scalar>(pair: &WeightPair<S>) -> S {
    pair.lambda1_raw - pair.lambda2_raw
}

/// Which model a cartography record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "1")]
    Model1,
    #[serde(rename = "2")]
    Model2,
}

impl ModelTag {
    fn as_str(self) -> &'static str {
        match self {
            ModelTag::Model1 => "1",
            ModelTag::Model2 => "2",
        }
    }
}

/// One sample's dynamics under one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartographyRecord {
    pub id: String,
    pub model: ModelTag,
    pub confidence: f64,
    pub variability: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta_lambda: f64,
    /// Pseudo-label equals gold, when gold is known.
    pub match_flag: Option<bool>,
}

/// Group statistics for one weight scheme of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGroupStats {
    pub mean_match: Option<f64>,
    pub mean_mismatch: Option<f64>,
    /// Probability a match sample outranks a mismatch sample (ties count
    /// half). Absent when either group is empty.
    pub auc: Option<f64>,
}

/// Match/mismatch separation summary for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSeparation {
    pub model: ModelTag,
    pub n_match: usize,
    pub n_mismatch: usize,
    pub lambda1: WeightGroupStats,
    pub lambda2: WeightGroupStats,
}

/// Summary across both models; present only when gold labels were supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartographySummary {
    pub models: Vec<ModelSeparation>,
}

/// Full cartography output: per-sample records for both models plus the
/// optional separation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CartographyReport {
    pub records: Vec<CartographyRecord>,
    pub summary: Option<CartographySummary>,
}

/// Rank-based separation: the fraction of (match, mismatch) pairs where the
/// match sample carries the larger value, ties counting one half. Undefined
/// (None) when either group is empty.
pub fn separation_auc(match_values: &[f64], mismatch_values: &[f64]) -> Option<f64> {
    if match_values.is_empty() || mismatch_values.is_empty() {
        return None;
    }
    let mut wins = 0.0f64;
    for &m in match_values {
        for &x in mismatch_values {
            if m > x {
                wins += 1.0;
            } else if m == x {
                wins += 0.5;
            }
        }
    }
    Some(wins / (match_values.len() * mismatch_values.len()) as f64)
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Per-sample cartography of both models over a shared sample list. When
/// `gold` is supplied, records carry match flags and the summary reports
/// per-model mean weights and separation AUC for both schemes.
pub fn cartography_report<S: Scalar>(
    ids: &[String],
    history1: &ProbabilityHistory<S>,
    history2: &ProbabilityHistory<S>,
    pseudo_labels: &[usize],
    gold_labels: Option<&[usize]>,
    mode: WeightMode,
) -> Result<CartographyReport> {
    let n = ids.len();
    for (name, len) in [
        ("history1", history1.num_samples()),
        ("history2", history2.num_samples()),
        ("pseudo_labels", pseudo_labels.len()),
    ] {
        if len != n {
            let _ = name;
            return Err(Error::HistoryLengthMismatch { expected: n, got: len });
        }
    }
    if let Some(gold) = gold_labels {
        if gold.len() != n {
            return Err(Error::HistoryLengthMismatch { expected: n, got: gold.len() });
        }
    }

    let match_flags: Option<Vec<bool>> = gold_labels
        .map(|gold| pseudo_labels.iter().zip(gold).map(|(p, g)| p == g).collect());

    let mut records = Vec::with_capacity(2 * n);
    let mut summary_models = Vec::new();

    for (tag, history) in [(ModelTag::Model1, history1), (ModelTag::Model2, history2)] {
        let pairs = history.weight_pairs(mode)?;
        for (i, pair) in pairs.iter().enumerate() {
            records.push(CartographyRecord {
                id: ids[i].clone(),
                model: tag,
                confidence: pair.confidence.to_f64_lossy(),
                variability: pair.variability.to_f64_lossy(),
                lambda1: pair.lambda1.to_f64_lossy(),
                lambda2: pair.lambda2.to_f64_lossy(),
                delta_lambda: delta_lambda(pair).to_f64_lossy(),
                match_flag: match_flags.as_ref().map(|flags| flags[i]),
            });
        }
        if let Some(flags) = &match_flags {
            let split = |values: Vec<f64>| -> (Vec<f64>, Vec<f64>) {
                let mut matched = Vec::new();
                let mut mismatched = Vec::new();
                for (v, &is_match) in values.into_iter().zip(flags) {
                    if is_match {
                        matched.push(v);
                    } else {
                        mismatched.push(v);
                    }
                }
                (matched, mismatched)
            };
            let (l1_match, l1_mismatch) =
                split(pairs.iter().map(|p| p.lambda1.to_f64_lossy()).collect());
            let (l2_match, l2_mismatch) =
                split(pairs.iter().map(|p| p.lambda2.to_f64_lossy()).collect());
            summary_models.push(ModelSeparation {
                model: tag,
                n_match: l1_match.len(),
                n_mismatch: l1_mismatch.len(),
                lambda1: WeightGroupStats {
                    mean_match: mean(&l1_match),
                    mean_mismatch: mean(&l1_mismatch),
                    auc: separation_auc(&l1_match, &l1_mismatch),
                },
                lambda2: WeightGroupStats {
                    mean_match: mean(&l2_match),
                    mean_mismatch: mean(&l2_mismatch),
                    auc: separation_auc(&l2_match, &l2_mismatch),
                },
            });
        }
    }

    let summary =
        match_flags.map(|_| CartographySummary { models: summary_models });
    Ok(CartographyReport { records, summary })
}

/// Write cartography records as CSV with the columns
/// `id, model, confidence, variability, lambda1, lambda2, delta_lambda, match`.
pub fn write_cartography_csv(path: &Path, records: &[CartographyRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "id,model,confidence,variability,lambda1,lambda2,delta_lambda,match")?;
    for r in records {
        let match_cell = match r.match_flag {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.id,
            r.model.as_str(),
            r.confidence,
            r.variability,
            r.lambda1,
            r.lambda2,
            r.delta_lambda,
            match_cell
        )?;
    }
    out.flush()?;
    Ok(())
}
