//! The weighted co-training pipeline and its ablation variants.
//!
//! The flagship strategy runs in three phases. Warmup trains each model on
//! its half of the labeled data for `T` epochs, recording after every epoch
//! the probability each model assigns to every pseudo-label. Co-training
//! re-initializes both models and trains them on the pseudo-labeled pool
//! for `E` epochs, each model's per-sample loss scaled by the weight
//! derived from the *peer's* recorded dynamics (`lambda2` of model 2's
//! history drives model 1 and `lambda1` of model 1's drives model 2); the
//! final warmup row seeds each history and weights refresh once per epoch.
//! Fine-tuning then returns to the labeled halves with early stopping, and
//! inference averages the two softmax outputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{
    classification_error, fit_supervised, train_epoch, OptimizerState, SoftmaxLinearModel,
    TrainBatch, TrainConfig,
};
use crate::data::{holdout_split, stratified_halve, Dataset, Example};
use crate::dynamics::{
    cartography_report, CartographyReport, CartographySummary, ProbabilityHistory, WeightMode,
    WeightPair,
};
use crate::error::{Error, Result};
use crate::pseudolabel::{
    join_pseudolabels, skew_from_counts, LabelSource, PseudoLabelRecord, PseudoLabeledSet,
    SkewStats,
};
use crate::scalar::Scalar;
use crate::seed::derive_seed;

/// Training strategy selector; the ablation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Full weighted co-training over pseudo-labels.
    LgCotrain,
    /// Weighting by confidence only; variability ignored.
    LgCotrainCc,
    /// Both models warm up and fine-tune on the same (full) labeled set.
    Singleset,
    /// Pseudo-labels replaced by gold labels.
    Oracle,
    /// Single model, each sample's weight randomly picked from its own
    /// `lambda1`/`lambda2`.
    StRandom,
    /// Two models trained on labeled + pseudo-labeled union, ensembled.
    FtEnsembled,
    /// Classic co-training: confident predictions exchanged between
    /// models, no external pseudo-labels.
    VanillaCotrain,
    /// Supervised on the labeled set only.
    SupLb,
    /// Supervised on labeled + pseudo-labeled union.
    SupLbPs,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::LgCotrain,
        Variant::LgCotrainCc,
        Variant::Singleset,
        Variant::Oracle,
        Variant::StRandom,
        Variant::FtEnsembled,
        Variant::VanillaCotrain,
        Variant::SupLb,
        Variant::SupLbPs,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::LgCotrain => "lg-cotrain",
            Variant::LgCotrainCc => "lg-cotrain-cc",
            Variant::Singleset => "singleset",
            Variant::Oracle => "oracle",
            Variant::StRandom => "st-random",
            Variant::FtEnsembled => "ft-ensembled",
            Variant::VanillaCotrain => "vanilla-cotrain",
            Variant::SupLb => "sup-lb",
            Variant::SupLbPs => "sup-lb-ps",
        }
    }

    /// Whether the variant consumes pseudo-label records.
    pub fn needs_pseudo_labels(&self) -> bool {
        !matches!(self, Variant::Oracle | Variant::VanillaCotrain | Variant::SupLb)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// Resolved pipeline configuration. Warmup shares the co-training
/// hyperparameters; only the epoch budget differs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Weight-generation (warmup) epochs.
    pub warmup_epochs: usize,
    /// Co-training epochs.
    pub cotrain_epochs: usize,
    pub cotrain: TrainConfig,
    pub finetune: TrainConfig,
    pub variant: Variant,
    pub base_seed: u64,
    /// One full-batch gradient step per epoch instead of per mini-batch.
    pub strict_epoch_updates: bool,
    /// Record dynamics in a dedicated post-epoch inference pass instead of
    /// reusing the forward values seen during training.
    pub record_extra_pass: bool,
    /// Confidence gate for the vanilla co-training exchange.
    pub exchange_threshold: f64,
    /// Held-out fraction of each labeled set used for early stopping when
    /// no explicit validation set is supplied.
    pub validation_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            warmup_epochs: 5,
            cotrain_epochs: 10,
            cotrain: TrainConfig { max_epochs: 10, ..Default::default() },
            finetune: TrainConfig { max_epochs: 100, ..Default::default() },
            variant: Variant::LgCotrain,
            base_seed: 0,
            strict_epoch_updates: false,
            record_extra_pass: false,
            exchange_threshold: 0.9,
            validation_fraction: 0.1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_epochs == 0 {
            return Err(Error::InvalidConfig("warmup_epochs must be >= 1".into()));
        }
        if self.cotrain_epochs == 0 {
            return Err(Error::InvalidConfig("cotrain_epochs must be >= 1".into()));
        }
        if !(0.0 < self.exchange_threshold && self.exchange_threshold <= 1.0) {
            return Err(Error::InvalidConfig("exchange_threshold must be in (0, 1]".into()));
        }
        if !(0.0 < self.validation_fraction && self.validation_fraction < 1.0) {
            return Err(Error::InvalidConfig("validation_fraction must be in (0, 1)".into()));
        }
        self.cotrain.validate()?;
        self.finetune.validate()
    }

    fn weight_mode(&self) -> WeightMode {
        match self.variant {
            Variant::LgCotrainCc => WeightMode::ConfidenceOnly,
            _ => WeightMode::ConfidenceVariability,
        }
    }

    /// Training config for one model's stream in one phase: the phase's
    /// hyperparameters with the shuffle seed derived from the base seed.
    fn stream(&self, phase: &str, model: usize) -> TrainConfig {
        let base = match phase {
            "finetune" => &self.finetune,
            _ => &self.cotrain,
        };
        TrainConfig {
            seed: derive_seed(self.base_seed, &format!("{phase}-shuffle-{model}")),
            ..base.clone()
        }
    }

    fn init_seed(&self, phase: &str, model: usize) -> u64 {
        derive_seed(self.base_seed, &format!("{phase}-init-{model}"))
    }
}

/// The named random streams a run derives from its base seed, as recorded
/// in run manifests.
pub fn derived_seeds(config: &PipelineConfig) -> Vec<(String, u64)> {
    let mut out = vec![("halve".to_string(), derive_seed(config.base_seed, "halve"))];
    for phase in ["warmup", "cotrain", "finetune"] {
        for model in 1..=2 {
            out.push((format!("{phase}-init-{model}"), config.init_seed(phase, model)));
            out.push((
                format!("{phase}-shuffle-{model}"),
                derive_seed(config.base_seed, &format!("{phase}-shuffle-{model}")),
            ));
        }
    }
    for model in 1..=2 {
        out.push((
            format!("finetune-holdout-{model}"),
            derive_seed(config.base_seed, &format!("finetune-holdout-{model}")),
        ));
    }
    out.push(("st-random-mask".to_string(), derive_seed(config.base_seed, "st-random-mask")));
    out
}

/// Pipeline phase marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warmup,
    Cotrain,
    Finetune,
    Done,
}

/// Everything warmup produces: trained throwaway models, their recorded
/// dynamics over the pseudo-labeled pool, and the initial weight pairs.
#[derive(Debug, Clone)]
pub struct WarmupOutput<S> {
    pub model1: SoftmaxLinearModel<S>,
    pub model2: SoftmaxLinearModel<S>,
    pub history1: ProbabilityHistory<S>,
    pub history2: ProbabilityHistory<S>,
    pub weights1: Vec<WeightPair<S>>,
    pub weights2: Vec<WeightPair<S>>,
    pub epoch_losses: Vec<Vec<f64>>,
}

/// Weights actually multiplied into each model's loss for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedWeights<S> {
    pub model1: Vec<S>,
    pub model2: Vec<S>,
}

/// Mutable co-training state across phases.
#[derive(Debug, Clone)]
pub struct CoTrainState<S> {
    pub model1: SoftmaxLinearModel<S>,
    pub model2: SoftmaxLinearModel<S>,
    pub history1: ProbabilityHistory<S>,
    pub history2: ProbabilityHistory<S>,
    pub weights1: Vec<WeightPair<S>>,
    pub weights2: Vec<WeightPair<S>>,
    /// One entry per co-training epoch.
    pub applied_log: Vec<AppliedWeights<S>>,
    pub cotrain_losses: Vec<Vec<f64>>,
    pub finetune_epochs: Vec<usize>,
    pub phase: Phase,
}

impl<S: Scalar> CoTrainState<S> {
    pub fn from_warmup(warmup: WarmupOutput<S>) -> Self {
        Self {
            model1: warmup.model1,
            model2: warmup.model2,
            history1: warmup.history1,
            history2: warmup.history2,
            weights1: warmup.weights1,
            weights2: warmup.weights2,
            applied_log: Vec::new(),
            cotrain_losses: Vec::new(),
            finetune_epochs: Vec::new(),
            phase: Phase::Warmup,
        }
    }
}

/// Two frozen classifiers whose averaged softmax drives inference.
#[derive(Debug, Clone)]
pub struct EnsembleModel<S> {
    model1: SoftmaxLinearModel<S>,
    model2: SoftmaxLinearModel<S>,
}

impl<S: Scalar> EnsembleModel<S> {
    pub fn new(model1: SoftmaxLinearModel<S>, model2: SoftmaxLinearModel<S>) -> Result<Self> {
        if model1.num_classes() != model2.num_classes()
            || model1.feature_dim() != model2.feature_dim()
        {
            return Err(Error::DimensionMismatch {
                expected: model1.num_classes(),
                got: model2.num_classes(),
            });
        }
        Ok(Self { model1, model2 })
    }

    pub fn predict_proba(&self, x: &[S]) -> Result<Vec<S>> {
        let p1 = self.model1.predict_proba(x)?;
        let p2 = self.model2.predict_proba(x)?;
        let half = S::cast(0.5);
        Ok(p1.iter().zip(&p2).map(|(&a, &b)| half * (a + b)).collect())
    }
}

/// Argmax of the averaged probability vectors; ties break toward the lowest
/// class index.
pub fn ensemble_predict<S: Scalar>(ensemble: &EnsembleModel<S>, x: &[S]) -> Result<usize> {
    let probs = ensemble.predict_proba(x)?;
    Ok(crate::classifier::argmax(&probs))
}

/// Fraction of a gold-labeled dataset the ensemble misclassifies.
pub fn ensemble_error<S: Scalar>(ensemble: &EnsembleModel<S>, dataset: &Dataset<S>) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("ensemble_error"));
    }
    let labels = dataset.gold_labels()?;
    let mut wrong = 0usize;
    for (ex, &label) in dataset.examples().iter().zip(&labels) {
        if ensemble_predict(ensemble, &ex.features)? != label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / dataset.len() as f64)
}

/// Probability each model assigns to every pseudo-label, in pool order.
fn record_label_probs<S: Scalar>(
    model: &SoftmaxLinearModel<S>,
    pool: &PseudoLabeledSet<S>,
) -> Result<Vec<S>> {
    pool.dataset
        .examples()
        .iter()
        .zip(&pool.pseudo_labels)
        .map(|(ex, &label)| Ok(model.predict_proba(&ex.features)?[label]))
        .collect()
}

fn ones<S: Scalar>(n: usize) -> Vec<S> {
    vec![S::one(); n]
}

/// Warmup: train each model on its labeled half for `warmup_epochs`,
/// recording the pseudo-label probabilities over the pool after every
/// epoch, then derive the initial weight pairs from the full histories.
pub fn warmup_weights<S: Scalar>(
    half1: &Dataset<S>,
    half2: &Dataset<S>,
    pool: &PseudoLabeledSet<S>,
    config: &PipelineConfig,
) -> Result<WarmupOutput<S>> {
    config.validate()?;
    if half1.is_empty() || half2.is_empty() {
        return Err(Error::EmptyInput("labeled halves"));
    }
    if pool.is_empty() {
        return Err(Error::EmptyInput("pseudo-labeled pool"));
    }
    let num_classes = pool.dataset.num_classes();
    let feature_dim = pool.dataset.feature_dim();
    let mode = config.weight_mode();

    let mut models = [
        SoftmaxLinearModel::init(num_classes, feature_dim, config.cotrain.init_scale, config.init_seed("warmup", 1)),
        SoftmaxLinearModel::init(num_classes, feature_dim, config.cotrain.init_scale, config.init_seed("warmup", 2)),
    ];
    let mut histories = [ProbabilityHistory::new(), ProbabilityHistory::new()];
    let mut optimizers = [
        OptimizerState::new(config.cotrain.optimizer, models[0].num_params()),
        OptimizerState::new(config.cotrain.optimizer, models[1].num_params()),
    ];
    let stream_configs = [config.stream("warmup", 1), config.stream("warmup", 2)];
    let halves = [half1, half2];
    let labels = [half1.gold_labels()?, half2.gold_labels()?];
    let mut epoch_losses = Vec::with_capacity(config.warmup_epochs);

    for epoch in 0..config.warmup_epochs {
        let mut losses = Vec::with_capacity(2);
        for (k, half) in halves.iter().enumerate() {
            let weights = ones::<S>(half.len());
            let batch = TrainBatch::new(half.examples(), &labels[k], &weights)?;
            let record = train_epoch(
                &mut models[k],
                &mut optimizers[k],
                &batch,
                &stream_configs[k],
                epoch,
            )?;
            losses.push(record.mean_loss);
            // Warmup trains on labeled halves, so dynamics over the pool
            // always need their own inference pass.
            let row = record_label_probs(&models[k], pool)?;
            histories[k].record_epoch(row)?;
        }
        epoch_losses.push(losses);
    }

    let [model1, model2] = models;
    let [history1, history2] = histories;
    let weights1 = history1.weight_pairs(mode)?;
    let weights2 = history2.weight_pairs(mode)?;
    Ok(WarmupOutput { model1, model2, history1, history2, weights1, weights2, epoch_losses })
}

/// Co-training: re-initialize both models, restart each history from its
/// final warmup row, then for every epoch train model 1 on the pool with
/// model 2's `lambda2` weights and model 2 with model 1's `lambda1`
/// weights, record the per-sample probabilities seen during the pass, and
/// refresh all weights from the grown histories.
pub fn cotrain<S: Scalar>(
    state: &mut CoTrainState<S>,
    pool: &PseudoLabeledSet<S>,
    config: &PipelineConfig,
) -> Result<()> {
    config.validate()?;
    let n = pool.len();
    if n == 0 {
        return Err(Error::EmptyInput("pseudo-labeled pool"));
    }
    if state.history1.num_samples() != n || state.history2.num_samples() != n {
        return Err(Error::HistoryLengthMismatch {
            expected: n,
            got: state.history1.num_samples(),
        });
    }
    let mode = config.weight_mode();

    // Initial weights come from the full warmup histories, recomputed here
    // so callers that amend a history see the effect.
    state.weights1 = state.history1.weight_pairs(mode)?;
    state.weights2 = state.history2.weight_pairs(mode)?;

    let num_classes = pool.dataset.num_classes();
    let feature_dim = pool.dataset.feature_dim();
    state.model1 = SoftmaxLinearModel::init(
        num_classes,
        feature_dim,
        config.cotrain.init_scale,
        config.init_seed("cotrain", 1),
    );
    state.model2 = SoftmaxLinearModel::init(
        num_classes,
        feature_dim,
        config.cotrain.init_scale,
        config.init_seed("cotrain", 2),
    );
    state.history1 = state.history1.restarted_from_last_row()?;
    state.history2 = state.history2.restarted_from_last_row()?;

    let mut stream1 = config.stream("cotrain", 1);
    let mut stream2 = config.stream("cotrain", 2);
    if config.strict_epoch_updates {
        stream1.batch_size = n;
        stream2.batch_size = n;
    }
    let mut opt1 = OptimizerState::new(config.cotrain.optimizer, state.model1.num_params());
    let mut opt2 = OptimizerState::new(config.cotrain.optimizer, state.model2.num_params());

    for epoch in 0..config.cotrain_epochs {
        // Cross-wiring: the peer's dynamics set each model's weights, and
        // they stay frozen for the whole epoch.
        let applied1: Vec<S> = state.weights2.iter().map(|p| p.lambda2).collect();
        let applied2: Vec<S> = state.weights1.iter().map(|p| p.lambda1).collect();

        let batch1 = TrainBatch::new(pool.dataset.examples(), &pool.pseudo_labels, &applied1)?;
        let record1 = train_epoch(&mut state.model1, &mut opt1, &batch1, &stream1, epoch)?;
        let batch2 = TrainBatch::new(pool.dataset.examples(), &pool.pseudo_labels, &applied2)?;
        let record2 = train_epoch(&mut state.model2, &mut opt2, &batch2, &stream2, epoch)?;

        let row1 = if config.record_extra_pass {
            record_label_probs(&state.model1, pool)?
        } else {
            record1.label_probs
        };
        let row2 = if config.record_extra_pass {
            record_label_probs(&state.model2, pool)?
        } else {
            record2.label_probs
        };
        state.history1.record_epoch(row1)?;
        state.history2.record_epoch(row2)?;
        state.weights1 = state.history1.weight_pairs(mode)?;
        state.weights2 = state.history2.weight_pairs(mode)?;

        state.applied_log.push(AppliedWeights { model1: applied1, model2: applied2 });
        state.cotrain_losses.push(vec![record1.mean_loss, record2.mean_loss]);
    }

    state.phase = Phase::Cotrain;
    Ok(())
}

/// Fine-tune each model on its labeled half, unweighted, with early
/// stopping. Without an explicit validation set, a seeded fraction of each
/// half is held out.
pub fn finetune<S: Scalar>(
    state: &mut CoTrainState<S>,
    half1: &Dataset<S>,
    half2: &Dataset<S>,
    validation: Option<&Dataset<S>>,
    config: &PipelineConfig,
) -> Result<()> {
    config.validate()?;
    state.phase = Phase::Finetune;
    let halves = [half1, half2];
    for (k, half) in halves.iter().enumerate() {
        let (train, val) = match validation {
            Some(v) => ((*half).clone(), v.clone()),
            None => holdout_split(
                half,
                config.validation_fraction,
                derive_seed(config.base_seed, &format!("finetune-holdout-{}", k + 1)),
            ),
        };
        let stream = config.stream("finetune", k + 1);
        let model = if k == 0 { state.model1.clone() } else { state.model2.clone() };
        let outcome = fit_supervised(model, &train, &val, &stream)?;
        if k == 0 {
            state.model1 = outcome.model;
        } else {
            state.model2 = outcome.model;
        }
        state.finetune_epochs.push(outcome.epochs_run);
    }
    state.phase = Phase::Done;
    Ok(())
}

/// Everything a variant run needs. The unlabeled pool's examples may carry
/// gold labels (joined from a sidecar) for the oracle variant and for
/// match/mismatch diagnostics; they are never used as training targets.
#[derive(Debug, Clone, Copy)]
pub struct RunInputs<'a, S> {
    pub labeled: &'a Dataset<S>,
    pub unlabeled: &'a Dataset<S>,
    pub test: &'a Dataset<S>,
    pub pseudo_labels: Option<&'a [PseudoLabelRecord]>,
    pub validation: Option<&'a Dataset<S>>,
}

/// Deterministic metrics bundle; serialized verbatim as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub variant: String,
    pub base_seed: u64,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub n_labeled: usize,
    pub n_pseudo: usize,
    pub n_test: usize,
    /// Headline test error in percent (ensemble where applicable).
    pub test_error: f64,
    /// Per-model test errors in percent.
    pub model_test_errors: Vec<f64>,
    pub pseudo_label_skew: Option<SkewStats>,
    pub warmup_losses: Vec<Vec<f64>>,
    pub cotrain_losses: Vec<Vec<f64>>,
    /// Mean applied weight per co-training epoch, per model.
    pub cotrain_mean_applied: Vec<Vec<f64>>,
    pub finetune_epochs: Vec<usize>,
    pub weight_summary_warmup: Option<CartographySummary>,
    pub weight_summary_final: Option<CartographySummary>,
}

impl RunMetrics {
    fn skeleton(variant: Variant, config: &PipelineConfig) -> Self {
        Self {
            variant: variant.to_string(),
            base_seed: config.base_seed,
            num_classes: 0,
            feature_dim: 0,
            n_labeled: 0,
            n_pseudo: 0,
            n_test: 0,
            test_error: 0.0,
            model_test_errors: Vec::new(),
            pseudo_label_skew: None,
            warmup_losses: Vec::new(),
            cotrain_losses: Vec::new(),
            cotrain_mean_applied: Vec::new(),
            finetune_epochs: Vec::new(),
            weight_summary_warmup: None,
            weight_summary_final: None,
        }
    }
}

/// A finished run: metrics plus the trained model(s) and cartography.
#[derive(Debug, Clone)]
pub struct RunOutput<S> {
    pub metrics: RunMetrics,
    pub models: Vec<SoftmaxLinearModel<S>>,
    pub cartography_warmup: Option<CartographyReport>,
    pub cartography_final: Option<CartographyReport>,
}

fn mean_f64<S: Scalar>(values: &[S]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / values.len() as f64
    }
}

fn percent(fraction: f64) -> f64 {
    100.0 * fraction
}

/// Resolve the pseudo-labeled pool for a variant: join supplied records, or
/// synthesize gold-sourced records for the oracle setting.
fn resolve_pool<S: Scalar>(
    inputs: &RunInputs<S>,
    variant: Variant,
) -> Result<(PseudoLabeledSet<S>, Vec<PseudoLabelRecord>)> {
    match variant {
        Variant::Oracle => {
            let gold = inputs.unlabeled.gold_labels().map_err(|_| {
                Error::MissingInput(
                    "oracle variant needs gold labels on the unlabeled set".into(),
                )
            })?;
            let records: Vec<PseudoLabelRecord> = inputs
                .unlabeled
                .examples()
                .iter()
                .zip(&gold)
                .map(|(ex, &label)| PseudoLabelRecord {
                    id: ex.id.clone(),
                    pseudo_label: label,
                    source: LabelSource::Oracle,
                    raw_response: None,
                })
                .collect();
            let pool = join_pseudolabels(inputs.unlabeled, &records)?;
            Ok((pool, records))
        }
        _ => {
            let records = inputs.pseudo_labels.ok_or_else(|| {
                Error::MissingInput(format!("variant {variant} needs pseudo-labels"))
            })?;
            let pool = join_pseudolabels(inputs.unlabeled, records)?;
            Ok((pool, records.to_vec()))
        }
    }
}

fn pool_cartography<S: Scalar>(
    pool: &PseudoLabeledSet<S>,
    history1: &ProbabilityHistory<S>,
    history2: &ProbabilityHistory<S>,
    mode: WeightMode,
) -> Result<CartographyReport> {
    let ids = pool.ids();
    let gold = pool.gold_labels();
    cartography_report(&ids, history1, history2, &pool.pseudo_labels, gold.as_deref(), mode)
}

/// Run one variant end to end. The output is a pure function of the inputs,
/// the configuration, and the base seed.
pub fn run_variant<S: Scalar>(inputs: &RunInputs<S>, config: &PipelineConfig) -> Result<RunOutput<S>> {
    config.validate()?;
    if inputs.labeled.is_empty() {
        return Err(Error::EmptyInput("labeled set"));
    }
    if inputs.test.is_empty() {
        return Err(Error::EmptyInput("test set"));
    }
    let variant = config.variant;
    match variant {
        Variant::LgCotrain | Variant::LgCotrainCc | Variant::Singleset | Variant::Oracle => {
            run_lg_family(inputs, config)
        }
        Variant::StRandom => run_st_random(inputs, config, None),
        Variant::FtEnsembled => run_union_supervised(inputs, config, 2),
        Variant::SupLb => run_sup_lb(inputs, config),
        Variant::SupLbPs => run_union_supervised(inputs, config, 1),
        Variant::VanillaCotrain => run_vanilla(inputs, config),
    }
}

fn run_lg_family<S: Scalar>(inputs: &RunInputs<S>, config: &PipelineConfig) -> Result<RunOutput<S>> {
    let variant = config.variant;
    let mode = config.weight_mode();
    let (pool, _records) = resolve_pool(inputs, variant)?;
    if pool.is_empty() {
        return Err(Error::EmptyInput("pseudo-labeled pool"));
    }

    let (half1, half2) = if variant == Variant::Singleset {
        (inputs.labeled.clone(), inputs.labeled.clone())
    } else {
        stratified_halve(inputs.labeled, derive_seed(config.base_seed, "halve"))?
    };

    let warmup = warmup_weights(&half1, &half2, &pool, config)?;
    let warmup_losses = warmup.epoch_losses.clone();
    let cartography_warmup = pool_cartography(&pool, &warmup.history1, &warmup.history2, mode)?;

    let mut state = CoTrainState::from_warmup(warmup);
    cotrain(&mut state, &pool, config)?;
    finetune(&mut state, &half1, &half2, inputs.validation, config)?;

    let cartography_final = pool_cartography(&pool, &state.history1, &state.history2, mode)?;

    let ensemble = EnsembleModel::new(state.model1.clone(), state.model2.clone())?;
    let err1 = classification_error(&state.model1, inputs.test)?;
    let err2 = classification_error(&state.model2, inputs.test)?;
    let err_ensemble = ensemble_error(&ensemble, inputs.test)?;

    let mut metrics = RunMetrics::skeleton(variant, config);
    metrics.num_classes = pool.dataset.num_classes();
    metrics.feature_dim = pool.dataset.feature_dim();
    metrics.n_labeled = inputs.labeled.len();
    metrics.n_pseudo = pool.len();
    metrics.n_test = inputs.test.len();
    metrics.test_error = percent(err_ensemble);
    metrics.model_test_errors = vec![percent(err1), percent(err2)];
    let mut class_counts = vec![0usize; pool.dataset.num_classes()];
    for &label in &pool.pseudo_labels {
        class_counts[label] += 1;
    }
    metrics.pseudo_label_skew = Some(skew_from_counts(&class_counts)?);
    metrics.warmup_losses = warmup_losses;
    metrics.cotrain_losses = state.cotrain_losses.clone();
    metrics.cotrain_mean_applied = state
        .applied_log
        .iter()
        .map(|a| vec![mean_f64(&a.model1), mean_f64(&a.model2)])
        .collect();
    metrics.finetune_epochs = state.finetune_epochs.clone();
    metrics.weight_summary_warmup = cartography_warmup.summary.clone();
    metrics.weight_summary_final = cartography_final.summary.clone();

    Ok(RunOutput {
        metrics,
        models: vec![state.model1, state.model2],
        cartography_warmup: Some(cartography_warmup),
        cartography_final: Some(cartography_final),
    })
}

/// Which weight scheme a sample uses in the self-training baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaChoice {
    Lambda1,
    Lambda2,
}

/// Self-training with randomly chosen weighting: a single model warms up on
/// the full labeled set, then trains on the pool with each sample weighted
/// by `lambda1` or `lambda2` from its *own* dynamics, the choice drawn once
/// per sample. `choices` overrides the random draw (used by tests).
pub fn run_st_random<S: Scalar>(
    inputs: &RunInputs<S>,
    config: &PipelineConfig,
    choices: Option<&[LambdaChoice]>,
) -> Result<RunOutput<S>> {
    config.validate()?;
    let mode = config.weight_mode();
    let (pool, _) = resolve_pool(inputs, Variant::StRandom)?;
    if pool.is_empty() {
        return Err(Error::EmptyInput("pseudo-labeled pool"));
    }
    let num_classes = pool.dataset.num_classes();
    let feature_dim = pool.dataset.feature_dim();
    let labels = inputs.labeled.gold_labels()?;

    // Warmup on the full labeled set.
    let mut model = SoftmaxLinearModel::init(
        num_classes,
        feature_dim,
        config.cotrain.init_scale,
        config.init_seed("warmup", 1),
    );
    let mut optimizer = OptimizerState::new(config.cotrain.optimizer, model.num_params());
    let stream = config.stream("warmup", 1);
    let mut history = ProbabilityHistory::new();
    let mut warmup_losses = Vec::new();
    for epoch in 0..config.warmup_epochs {
        let weights = ones::<S>(inputs.labeled.len());
        let batch = TrainBatch::new(inputs.labeled.examples(), &labels, &weights)?;
        let record = train_epoch(&mut model, &mut optimizer, &batch, &stream, epoch)?;
        warmup_losses.push(vec![record.mean_loss]);
        history.record_epoch(record_label_probs(&model, &pool)?)?;
    }

    let drawn: Vec<LambdaChoice>;
    let choices: &[LambdaChoice] = match choices {
        Some(c) => {
            if c.len() != pool.len() {
                return Err(Error::DimensionMismatch { expected: pool.len(), got: c.len() });
            }
            c
        }
        None => {
            let mut rng = crate::seed::rng_for(derive_seed(config.base_seed, "st-random-mask"));
            drawn = (0..pool.len())
                .map(|_| {
                    if rand::Rng::random::<bool>(&mut rng) {
                        LambdaChoice::Lambda1
                    } else {
                        LambdaChoice::Lambda2
                    }
                })
                .collect();
            &drawn
        }
    };

    // Self-training over the pool with per-sample scheme choice.
    model = SoftmaxLinearModel::init(
        num_classes,
        feature_dim,
        config.cotrain.init_scale,
        config.init_seed("cotrain", 1),
    );
    let mut optimizer = OptimizerState::new(config.cotrain.optimizer, model.num_params());
    let mut stream = config.stream("cotrain", 1);
    if config.strict_epoch_updates {
        stream.batch_size = pool.len();
    }
    history = history.restarted_from_last_row()?;
    let mut pairs = history.weight_pairs(mode)?;
    let mut cotrain_losses = Vec::new();
    let mut cotrain_mean_applied = Vec::new();
    for epoch in 0..config.cotrain_epochs {
        let applied: Vec<S> = pairs
            .iter()
            .zip(choices)
            .map(|(pair, choice)| match choice {
                LambdaChoice::Lambda1 => pair.lambda1,
                LambdaChoice::Lambda2 => pair.lambda2,
            })
            .collect();
        let batch = TrainBatch::new(pool.dataset.examples(), &pool.pseudo_labels, &applied)?;
        let record = train_epoch(&mut model, &mut optimizer, &batch, &stream, epoch)?;
        let row = if config.record_extra_pass {
            record_label_probs(&model, &pool)?
        } else {
            record.label_probs
        };
        history.record_epoch(row)?;
        pairs = history.weight_pairs(mode)?;
        cotrain_losses.push(vec![record.mean_loss]);
        cotrain_mean_applied.push(vec![mean_f64(&applied)]);
    }

    // Fine-tune on the full labeled set.
    let (train, val) = match inputs.validation {
        Some(v) => (inputs.labeled.clone(), v.clone()),
        None => holdout_split(
            inputs.labeled,
            config.validation_fraction,
            derive_seed(config.base_seed, "finetune-holdout-1"),
        ),
    };
    let outcome = fit_supervised(model, &train, &val, &config.stream("finetune", 1))?;

    let error = classification_error(&outcome.model, inputs.test)?;
    let mut metrics = RunMetrics::skeleton(Variant::StRandom, config);
    metrics.num_classes = num_classes;
    metrics.feature_dim = feature_dim;
    metrics.n_labeled = inputs.labeled.len();
    metrics.n_pseudo = pool.len();
    metrics.n_test = inputs.test.len();
    metrics.test_error = percent(error);
    metrics.model_test_errors = vec![percent(error)];
    metrics.warmup_losses = warmup_losses;
    metrics.cotrain_losses = cotrain_losses;
    metrics.cotrain_mean_applied = cotrain_mean_applied;
    metrics.finetune_epochs = vec![outcome.epochs_run];

    Ok(RunOutput {
        metrics,
        models: vec![outcome.model],
        cartography_warmup: None,
        cartography_final: None,
    })
}

/// Relabel clones of examples with assigned training targets.
fn with_labels<S: Scalar>(examples: &[Example<S>], labels: &[usize]) -> Vec<Example<S>> {
    examples
        .iter()
        .zip(labels)
        .map(|(ex, &label)| Example { gold_label: Some(label), ..ex.clone() })
        .collect()
}

/// Supervised training on labeled + pseudo-labeled union with one or two
/// independently seeded models (Sup(lb+ps) and FT-Ensembled respectively).
fn run_union_supervised<S: Scalar>(
    inputs: &RunInputs<S>,
    config: &PipelineConfig,
    num_models: usize,
) -> Result<RunOutput<S>> {
    let variant = if num_models == 2 { Variant::FtEnsembled } else { Variant::SupLbPs };
    let (pool, _) = resolve_pool(inputs, variant)?;

    let (labeled_train, val) = match inputs.validation {
        Some(v) => (inputs.labeled.clone(), v.clone()),
        None => holdout_split(
            inputs.labeled,
            config.validation_fraction,
            derive_seed(config.base_seed, "finetune-holdout-1"),
        ),
    };

    let mut union = labeled_train.examples().to_vec();
    union.extend(with_labels(pool.dataset.examples(), &pool.pseudo_labels));
    let union =
        Dataset::new(union, pool.dataset.num_classes(), pool.dataset.feature_dim())?;

    let mut models = Vec::with_capacity(num_models);
    let mut finetune_epochs = Vec::with_capacity(num_models);
    for k in 1..=num_models {
        let model = SoftmaxLinearModel::init(
            union.num_classes(),
            union.feature_dim(),
            config.finetune.init_scale,
            config.init_seed("finetune", k),
        );
        let outcome = fit_supervised(model, &union, &val, &config.stream("finetune", k))?;
        finetune_epochs.push(outcome.epochs_run);
        models.push(outcome.model);
    }

    let model_errors: Vec<f64> = models
        .iter()
        .map(|m| classification_error(m, inputs.test).map(percent))
        .collect::<Result<_>>()?;
    let test_error = if num_models == 2 {
        let ensemble = EnsembleModel::new(models[0].clone(), models[1].clone())?;
        percent(ensemble_error(&ensemble, inputs.test)?)
    } else {
        model_errors[0]
    };

    let mut metrics = RunMetrics::skeleton(variant, config);
    metrics.num_classes = union.num_classes();
    metrics.feature_dim = union.feature_dim();
    metrics.n_labeled = inputs.labeled.len();
    metrics.n_pseudo = pool.len();
    metrics.n_test = inputs.test.len();
    metrics.test_error = test_error;
    metrics.model_test_errors = model_errors;
    metrics.finetune_epochs = finetune_epochs;

    Ok(RunOutput { metrics, models, cartography_warmup: None, cartography_final: None })
}

/// Supervised baseline on the labeled set alone.
fn run_sup_lb<S: Scalar>(inputs: &RunInputs<S>, config: &PipelineConfig) -> Result<RunOutput<S>> {
    let (train, val) = match inputs.validation {
        Some(v) => (inputs.labeled.clone(), v.clone()),
        None => holdout_split(
            inputs.labeled,
            config.validation_fraction,
            derive_seed(config.base_seed, "finetune-holdout-1"),
        ),
    };
    let model = SoftmaxLinearModel::init(
        inputs.labeled.num_classes(),
        inputs.labeled.feature_dim(),
        config.finetune.init_scale,
        config.init_seed("finetune", 1),
    );
    let outcome = fit_supervised(model, &train, &val, &config.stream("finetune", 1))?;
    let error = percent(classification_error(&outcome.model, inputs.test)?);

    let mut metrics = RunMetrics::skeleton(Variant::SupLb, config);
    metrics.num_classes = inputs.labeled.num_classes();
    metrics.feature_dim = inputs.labeled.feature_dim();
    metrics.n_labeled = inputs.labeled.len();
    metrics.n_test = inputs.test.len();
    metrics.test_error = error;
    metrics.model_test_errors = vec![error];
    metrics.finetune_epochs = vec![outcome.epochs_run];

    Ok(RunOutput {
        metrics,
        models: vec![outcome.model],
        cartography_warmup: None,
        cartography_final: None,
    })
}

/// Classic co-training without external pseudo-labels: each epoch, each
/// model labels the unlabeled pool and its confident predictions join the
/// peer's next-epoch training set; exchanged labels refresh every epoch.
fn run_vanilla<S: Scalar>(inputs: &RunInputs<S>, config: &PipelineConfig) -> Result<RunOutput<S>> {
    let (half1, half2) = stratified_halve(inputs.labeled, derive_seed(config.base_seed, "halve"))?;
    let num_classes = inputs.labeled.num_classes();
    let feature_dim = inputs.labeled.feature_dim();
    let threshold = S::cast(config.exchange_threshold);

    let mut models = [
        SoftmaxLinearModel::init(num_classes, feature_dim, config.cotrain.init_scale, config.init_seed("warmup", 1)),
        SoftmaxLinearModel::init(num_classes, feature_dim, config.cotrain.init_scale, config.init_seed("warmup", 2)),
    ];
    let mut optimizers = [
        OptimizerState::new(config.cotrain.optimizer, models[0].num_params()),
        OptimizerState::new(config.cotrain.optimizer, models[1].num_params()),
    ];
    let streams = [config.stream("cotrain", 1), config.stream("cotrain", 2)];
    let halves = [half1, half2];
    // exchanges[k]: confident (example, label) pairs destined for model k.
    let mut exchanges: [Vec<Example<S>>; 2] = [Vec::new(), Vec::new()];
    let mut cotrain_losses = Vec::new();

    for epoch in 0..config.cotrain_epochs {
        let mut losses = Vec::with_capacity(2);
        for k in 0..2 {
            let mut train_set = halves[k].examples().to_vec();
            train_set.extend(exchanges[k].iter().cloned());
            let labels: Vec<usize> =
                train_set.iter().map(|ex| ex.gold_label.expect("labeled by construction")).collect();
            let weights = ones::<S>(train_set.len());
            let batch = TrainBatch::new(&train_set, &labels, &weights)?;
            let record = train_epoch(&mut models[k], &mut optimizers[k], &batch, &streams[k], epoch)?;
            losses.push(record.mean_loss);
        }
        cotrain_losses.push(losses);

        // Refresh the exchange: model k's confident predictions go to the
        // peer (index 1 - k).
        for k in 0..2 {
            let mut confident = Vec::new();
            for ex in inputs.unlabeled.examples() {
                let probs = models[k].predict_proba(&ex.features)?;
                let best = crate::classifier::argmax(&probs);
                if probs[best] >= threshold {
                    confident.push(Example { gold_label: Some(best), ..ex.clone() });
                }
            }
            exchanges[1 - k] = confident;
        }
    }

    let [model1, model2] = models;
    let ensemble = EnsembleModel::new(model1.clone(), model2.clone())?;
    let err1 = percent(classification_error(&model1, inputs.test)?);
    let err2 = percent(classification_error(&model2, inputs.test)?);
    let test_error = percent(ensemble_error(&ensemble, inputs.test)?);

    let mut metrics = RunMetrics::skeleton(Variant::VanillaCotrain, config);
    metrics.num_classes = num_classes;
    metrics.feature_dim = feature_dim;
    metrics.n_labeled = inputs.labeled.len();
    metrics.n_test = inputs.test.len();
    metrics.test_error = test_error;
    metrics.model_test_errors = vec![err1, err2];
    metrics.cotrain_losses = cotrain_losses;

    Ok(RunOutput {
        metrics,
        models: vec![model1, model2],
        cartography_warmup: None,
        cartography_final: None,
    })
}
