//! Probabilistic linear classifier with per-sample-weighted cross-entropy.
//!
//! The model is a plain softmax regression head: logits `Wx + b`, trained
//! by mini-batch gradient descent where every sample's loss term is scaled
//! by its importance weight. The analytic gradient is exposed so tests can
//! check it against finite differences.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Example};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Gradient-step rule. SGD is the default; Adam keeps the usual first and
/// second moment estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Training hyperparameters. `max_epochs = 0` is permitted and means the
/// phase is skipped entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub l2_reg: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 32,
            max_epochs: 100,
            early_stop_patience: 5,
            l2_reg: 1e-4,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
            init_scale: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // Zero is allowed: a frozen-model pass that only records dynamics.
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.l2_reg < 0.0 || !self.l2_reg.is_finite() {
            return Err(Error::InvalidConfig("l2_reg must be >= 0".into()));
        }
        if self.init_scale < 0.0 || !self.init_scale.is_finite() {
            return Err(Error::InvalidConfig("init_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Softmax regression model: a `C x d` weight matrix (row-major) and a
/// length-`C` bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxLinearModel<S> {
    weights: Vec<S>,
    bias: Vec<S>,
    num_classes: usize,
    feature_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    num_classes: usize,
    feature_dim: usize,
}

impl<S: Scalar> SoftmaxLinearModel<S> {
    /// All-zero parameters; predicts the uniform distribution everywhere.
    pub fn zeros(num_classes: usize, feature_dim: usize) -> Self {
        Self {
            weights: vec![S::zero(); num_classes * feature_dim],
            bias: vec![S::zero(); num_classes],
            num_classes,
            feature_dim,
        }
    }

    /// Seeded initialization: every parameter drawn from a zero-mean normal
    /// with the given scale.
    pub fn init(num_classes: usize, feature_dim: usize, scale: f64, init_seed: u64) -> Self {
        let mut rng = seed::rng_for(init_seed);
        let normal = StandardNormal;
        let mut draw = || {
            let z: f64 = normal.sample(&mut rng);
            S::cast(scale * z)
        };
        let weights = (0..num_classes * feature_dim).map(|_| draw()).collect();
        let bias = (0..num_classes).map(|_| draw()).collect();
        Self { weights, bias, num_classes, feature_dim }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Flattened parameters: weight rows in order, then the bias.
    pub fn params_flat(&self) -> Vec<S> {
        let mut out = self.weights.clone();
        out.extend_from_slice(&self.bias);
        out
    }

    pub fn set_params_flat(&mut self, params: &[S]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let split = self.weights.len();
        self.weights.copy_from_slice(&params[..split]);
        self.bias.copy_from_slice(&params[split..]);
        Ok(())
    }

    /// Stable hash of the parameter bit patterns; used to check that
    /// re-initialized models really differ from their predecessors.
    pub fn param_digest(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.num_params() * 8);
        for v in self.weights.iter().chain(self.bias.iter()) {
            bytes.extend_from_slice(&v.to_f64_lossy().to_bits().to_le_bytes());
        }
        seed::fnv1a64(&bytes)
    }

    pub fn logits(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch { expected: self.feature_dim, got: x.len() });
        }
        let mut out = self.bias.clone();
        for (class, row) in self.weights.chunks_exact(self.feature_dim).enumerate() {
            let dot = row.iter().zip(x).map(|(&w, &v)| w * v).sum::<S>();
            out[class] += dot;
        }
        Ok(out)
    }

    /// Softmax of `Wx + b` with max-subtraction stabilization. Entries are
    /// strictly positive and sum to one.
    pub fn predict_proba(&self, x: &[S]) -> Result<Vec<S>> {
        let logits = self.logits(x)?;
        Ok(softmax(&logits))
    }

    /// Argmax class with ties broken toward the lowest index.
    pub fn predict_class(&self, x: &[S]) -> Result<usize> {
        let probs = self.predict_proba(x)?;
        Ok(argmax(&probs))
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let checkpoint = Checkpoint {
            weights: self
                .weights
                .chunks_exact(self.feature_dim.max(1))
                .map(|row| row.iter().map(|v| v.to_f64_lossy()).collect())
                .collect(),
            bias: self.bias.iter().map(|v| v.to_f64_lossy()).collect(),
            num_classes: self.num_classes,
            feature_dim: self.feature_dim,
        };
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, &checkpoint)?;
        out.flush()?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let checkpoint: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if checkpoint.weights.len() != checkpoint.num_classes
            || checkpoint.bias.len() != checkpoint.num_classes
            || checkpoint.weights.iter().any(|row| row.len() != checkpoint.feature_dim)
        {
            return Err(Error::InvalidConfig("checkpoint shape is inconsistent".into()));
        }
        let weights: Vec<S> =
            checkpoint.weights.iter().flatten().map(|&v| S::cast(v)).collect();
        let bias: Vec<S> = checkpoint.bias.iter().map(|&v| S::cast(v)).collect();
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("checkpoint parameters"));
        }
        Ok(Self {
            weights,
            bias,
            num_classes: checkpoint.num_classes,
            feature_dim: checkpoint.feature_dim,
        })
    }
}

pub(crate) fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().copied().sum::<S>();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn argmax<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A training batch: examples with assigned labels and importance weights.
#[derive(Debug, Clone, Copy)]
pub struct TrainBatch<'a, S> {
    pub examples: &'a [Example<S>],
    pub labels: &'a [usize],
    pub weights: &'a [S],
}

impl<'a, S: Scalar> TrainBatch<'a, S> {
    pub fn new(examples: &'a [Example<S>], labels: &'a [usize], weights: &'a [S]) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::EmptyInput("training batch"));
        }
        if examples.len() != labels.len() || examples.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: examples.len(),
                got: labels.len().min(weights.len()),
            });
        }
        if weights.iter().any(|w| *w < S::zero()) {
            return Err(Error::InputOutOfRange("weights must be >= 0"));
        }
        Ok(Self { examples, labels, weights })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Mean over the batch of `weight * -ln p(label)`. Zero-weight samples
/// contribute nothing but still count toward the batch size.
pub fn weighted_ce_loss<S: Scalar>(probs: &[Vec<S>], labels: &[usize], weights: &[S]) -> Result<S> {
    if probs.is_empty() {
        return Err(Error::EmptyInput("weighted_ce_loss"));
    }
    if probs.len() != labels.len() || probs.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: labels.len().min(weights.len()),
        });
    }
    if weights.iter().any(|w| *w < S::zero()) {
        return Err(Error::InputOutOfRange("weights must be >= 0"));
    }
    let mut total = S::zero();
    for ((p, &label), &weight) in probs.iter().zip(labels).zip(weights) {
        if label >= p.len() {
            return Err(Error::LabelOutOfRange { label, num_classes: p.len() });
        }
        if weight > S::zero() {
            total += weight * -(p[label].ln());
        }
    }
    Ok(total / S::cast(probs.len() as f64))
}

/// Weighted cross-entropy of a batch under the model, plus the L2 penalty
/// `l2_reg / 2 * ||W||^2`. This is the scalar whose gradient
/// [`gradient`] computes; finite-difference checks go through here.
pub fn batch_loss<S: Scalar>(
    model: &SoftmaxLinearModel<S>,
    batch: &TrainBatch<S>,
    l2_reg: f64,
) -> Result<S> {
    let probs: Vec<Vec<S>> = batch
        .examples
        .iter()
        .map(|ex| model.predict_proba(&ex.features))
        .collect::<Result<_>>()?;
    let data_term = weighted_ce_loss(&probs, batch.labels, batch.weights)?;
    let l2 = S::cast(l2_reg);
    let reg_term = S::cast(0.5) * l2 * model.weights.iter().map(|&w| w * w).sum::<S>();
    Ok(data_term + reg_term)
}

/// Analytic gradient of [`batch_loss`] as a flat vector (weight rows, then
/// bias). The L2 term applies to the weight matrix only.
pub fn gradient<S: Scalar>(
    model: &SoftmaxLinearModel<S>,
    batch: &TrainBatch<S>,
    l2_reg: f64,
) -> Result<Vec<S>> {
    let (grad, _) = gradient_and_loss(model, batch, l2_reg)?;
    Ok(grad)
}

/// Gradient plus the forward probabilities of each sample's assigned label,
/// so a training pass can record dynamics without a second forward.
fn gradient_probs_loss<S: Scalar>(
    model: &SoftmaxLinearModel<S>,
    batch: &TrainBatch<S>,
    l2_reg: f64,
) -> Result<(Vec<S>, Vec<S>, S)> {
    let c = model.num_classes;
    let d = model.feature_dim;
    let batch_len = S::cast(batch.len() as f64);
    let mut grad = vec![S::zero(); model.num_params()];
    let mut label_probs = Vec::with_capacity(batch.len());
    let mut loss = S::zero();

    for ((ex, &label), &weight) in batch.examples.iter().zip(batch.labels).zip(batch.weights) {
        if label >= c {
            return Err(Error::LabelOutOfRange { label, num_classes: c });
        }
        let probs = model.predict_proba(&ex.features)?;
        label_probs.push(probs[label]);
        if weight == S::zero() {
            continue;
        }
        loss += weight * -(probs[label].ln());
        for class in 0..c {
            let indicator = if class == label { S::one() } else { S::zero() };
            let coeff = weight * (probs[class] - indicator) / batch_len;
            let row = &mut grad[class * d..(class + 1) * d];
            for (g, &x) in row.iter_mut().zip(&ex.features) {
                *g += coeff * x;
            }
            grad[c * d + class] += coeff;
        }
    }

    let l2 = S::cast(l2_reg);
    if l2 > S::zero() {
        for (g, &w) in grad[..c * d].iter_mut().zip(&model.weights) {
            *g += l2 * w;
        }
    }
    Ok((grad, label_probs, loss / batch_len))
}

fn gradient_and_loss<S: Scalar>(
    model: &SoftmaxLinearModel<S>,
    batch: &TrainBatch<S>,
    l2_reg: f64,
) -> Result<(Vec<S>, S)> {
    let (grad, _, loss) = gradient_probs_loss(model, batch, l2_reg)?;
    Ok((grad, loss))
}

/// Mutable optimizer state carried across the epochs of one training phase.
#[derive(Debug, Clone)]
pub struct OptimizerState<S> {
    kind: OptimizerKind,
    first_moment: Vec<S>,
    second_moment: Vec<S>,
    step_count: u64,
}

impl<S: Scalar> OptimizerState<S> {
    pub fn new(kind: OptimizerKind, num_params: usize) -> Self {
        let moments = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam { .. } => num_params,
        };
        Self {
            kind,
            first_moment: vec![S::zero(); moments],
            second_moment: vec![S::zero(); moments],
            step_count: 0,
        }
    }

    fn apply(&mut self, model: &mut SoftmaxLinearModel<S>, grad: &[S], learning_rate: f64) {
        let lr = S::cast(learning_rate);
        match self.kind {
            OptimizerKind::Sgd => {
                for (param, &g) in
                    model.weights.iter_mut().chain(model.bias.iter_mut()).zip(grad)
                {
                    *param -= lr * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                self.step_count += 1;
                let b1 = S::cast(beta1);
                let b2 = S::cast(beta2);
                let eps = S::cast(epsilon);
                let bias1 = S::cast(1.0 - beta1.powi(self.step_count as i32));
                let bias2 = S::cast(1.0 - beta2.powi(self.step_count as i32));
                let params = model.weights.iter_mut().chain(model.bias.iter_mut());
                for (((param, &g), m), v) in params
                    .zip(grad)
                    .zip(self.first_moment.iter_mut())
                    .zip(self.second_moment.iter_mut())
                {
                    *m = b1 * *m + (S::one() - b1) * g;
                    *v = b2 * *v + (S::one() - b2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    *param -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

/// Outcome of one epoch: per-sample probabilities of the assigned label,
/// recorded at the moment each sample's mini-batch was forwarded, plus the
/// mean weighted loss over the epoch's batches.
#[derive(Debug, Clone)]
pub struct EpochRecord<S> {
    pub label_probs: Vec<S>,
    pub mean_loss: f64,
}

/// One full pass over the data in mini-batches. The shuffle order is a pure
/// function of `(config.seed, epoch)`; weights are frozen for the epoch.
pub fn train_epoch<S: Scalar>(
    model: &mut SoftmaxLinearModel<S>,
    optimizer: &mut OptimizerState<S>,
    batch: &TrainBatch<S>,
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochRecord<S>> {
    config.validate()?;
    let n = batch.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng_for(seed::epoch_seed(config.seed, epoch));
    order.shuffle(&mut rng);

    let mut label_probs = vec![S::zero(); n];
    let mut loss_sum = 0.0f64;
    let mut batches = 0usize;

    let mut examples = Vec::with_capacity(config.batch_size);
    let mut labels = Vec::with_capacity(config.batch_size);
    let mut weights = Vec::with_capacity(config.batch_size);
    for chunk in order.chunks(config.batch_size) {
        examples.clear();
        labels.clear();
        weights.clear();
        for &i in chunk {
            examples.push(batch.examples[i].clone());
            labels.push(batch.labels[i]);
            weights.push(batch.weights[i]);
        }
        let view = TrainBatch::new(&examples, &labels, &weights)?;
        let (grad, probs, loss) = gradient_probs_loss(model, &view, config.l2_reg)?;
        for (&i, &p) in chunk.iter().zip(&probs) {
            label_probs[i] = p;
        }
        optimizer.apply(model, &grad, config.learning_rate);
        loss_sum += loss.to_f64_lossy();
        batches += 1;
    }

    Ok(EpochRecord { label_probs, mean_loss: loss_sum / batches.max(1) as f64 })
}

/// Fraction of `dataset` misclassified by the model (gold labels required).
pub fn classification_error<S: Scalar>(
    model: &SoftmaxLinearModel<S>,
    dataset: &Dataset<S>,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("classification_error"));
    }
    let labels = dataset.gold_labels()?;
    let mut wrong = 0usize;
    for (ex, &label) in dataset.examples().iter().zip(&labels) {
        if model.predict_class(&ex.features)? != label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / dataset.len() as f64)
}

/// Result of a supervised fit: the best-validation-error snapshot plus how
/// far training actually ran.
#[derive(Debug, Clone)]
pub struct FitOutcome<S> {
    pub model: SoftmaxLinearModel<S>,
    pub epochs_run: usize,
    pub best_val_error: f64,
}

/// Unweighted supervised training with early stopping on validation error.
/// The input model is itself a snapshot candidate, so the returned model is
/// never worse on the validation set than where it started.
pub fn fit_supervised<S: Scalar>(
    model: SoftmaxLinearModel<S>,
    labeled: &Dataset<S>,
    validation: &Dataset<S>,
    config: &TrainConfig,
) -> Result<FitOutcome<S>> {
    if labeled.is_empty() {
        return Err(Error::EmptyInput("fit_supervised"));
    }
    config.validate()?;
    let labels = labeled.gold_labels()?;
    let ones = vec![S::one(); labeled.len()];

    let mut current = model;
    let mut best_error = classification_error(&current, validation)?;
    let mut best_model = current.clone();
    let mut optimizer = OptimizerState::new(config.optimizer, current.num_params());
    let mut stale_epochs = 0usize;
    let mut epochs_run = 0usize;

    for epoch in 0..config.max_epochs {
        let batch = TrainBatch::new(labeled.examples(), &labels, &ones)?;
        train_epoch(&mut current, &mut optimizer, &batch, config, epoch)?;
        epochs_run = epoch + 1;
        let error = classification_error(&current, validation)?;
        if error < best_error {
            best_error = error;
            best_model = current.clone();
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs > config.early_stop_patience {
                break;
            }
        }
    }

    Ok(FitOutcome { model: best_model, epochs_run, best_val_error: best_error })
}
