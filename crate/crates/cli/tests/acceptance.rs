//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured values (visible with `--nocapture`).

use std::sync::LazyLock;

use cotrain_core::classifier::{batch_loss, gradient, SoftmaxLinearModel, TrainBatch};
use cotrain_core::data::{generate_clusters, imbalanced_counts, Dataset, Example, SyntheticSpec};
use cotrain_core::dynamics::{lambda_weights, ProbabilityHistory};
use cotrain_core::pipeline::{
    cotrain, run_variant, warmup_weights, CoTrainState, PipelineConfig, RunInputs, Variant,
};
use cotrain_core::pseudolabel::{
    join_pseudolabels, simulate_oracle, skew_from_counts, NoiseModel, PseudoLabelRecord,
};
use cotrain_core::seed::{derive_seed, rng_for};
use cotrain_core::Real;
use rand::Rng;

// ---------------------------------------------------------------------
// Shared synthetic study: C=4, d=32, 100 labeled, 4000 unlabeled with
// simulated-oracle noise rho=0.25, 1000 test samples, 5 seeds.
// ---------------------------------------------------------------------

const STUDY_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const STUDY_CLASSES: usize = 4;
const STUDY_DIM: usize = 32;
const STUDY_LABELED: usize = 100;
const STUDY_UNLABELED: usize = 4000;
const STUDY_TEST: usize = 1000;
const STUDY_RHO: f64 = 0.25;
const STUDY_SPREAD: f64 = 0.45;

struct StudySetup {
    labeled: Dataset<Real>,
    unlabeled: Dataset<Real>,
    test: Dataset<Real>,
    records: Vec<PseudoLabelRecord>,
}

fn study_setup(seed: u64) -> StudySetup {
    let split = |tag: &str, total: usize| {
        let counts = imbalanced_counts(total, STUDY_CLASSES, 1.0);
        let spec = SyntheticSpec {
            num_classes: STUDY_CLASSES,
            feature_dim: STUDY_DIM,
            samples_per_class_max: counts[0],
            imbalance_ratio: 1.0,
            cluster_spread: STUDY_SPREAD,
            seed: derive_seed(seed, tag),
        };
        generate_clusters::<Real>(&spec, &counts, tag).unwrap()
    };
    let labeled = split("lab", STUDY_LABELED);
    let unlabeled = split("unl", STUDY_UNLABELED);
    let test = split("test", STUDY_TEST);
    let records = simulate_oracle(
        &unlabeled,
        &NoiseModel::UniformFlip { rho: STUDY_RHO },
        derive_seed(seed, "noise"),
    )
    .unwrap();
    StudySetup { labeled, unlabeled, test, records }
}

fn study_config(variant: Variant, seed: u64) -> PipelineConfig {
    PipelineConfig { variant, base_seed: seed, ..Default::default() }
}

struct SeedOutcome {
    lg: f64,
    sup: f64,
    ft: f64,
    oracle: f64,
    auc_lambda2: f64,
}

static STUDY: LazyLock<Vec<SeedOutcome>> = LazyLock::new(|| {
    STUDY_SEEDS
        .iter()
        .map(|&seed| {
            let setup = study_setup(seed);
            let inputs = RunInputs {
                labeled: &setup.labeled,
                unlabeled: &setup.unlabeled,
                test: &setup.test,
                pseudo_labels: Some(&setup.records),
                validation: None,
            };
            let lg = run_variant(&inputs, &study_config(Variant::LgCotrain, seed)).unwrap();
            let sup = run_variant(&inputs, &study_config(Variant::SupLb, seed)).unwrap();
            let ft = run_variant(&inputs, &study_config(Variant::FtEnsembled, seed)).unwrap();
            let oracle = run_variant(&inputs, &study_config(Variant::Oracle, seed)).unwrap();
            let auc_lambda2 = lg
                .metrics
                .weight_summary_warmup
                .as_ref()
                .expect("gold labels present, summary exists")
                .models[1]
                .lambda2
                .auc
                .expect("both match groups populated");
            let outcome = SeedOutcome {
                lg: lg.metrics.test_error,
                sup: sup.metrics.test_error,
                ft: ft.metrics.test_error,
                oracle: oracle.metrics.test_error,
                auc_lambda2,
            };
            println!(
                "study seed {seed}: lg {:.2}% sup {:.2}% ft {:.2}% oracle {:.2}% auc {:.3}",
                outcome.lg, outcome.sup, outcome.ft, outcome.oracle, outcome.auc_lambda2
            );
            outcome
        })
        .collect()
});

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let collected: Vec<f64> = values.collect();
    collected.iter().sum::<f64>() / collected.len() as f64
}

// ---------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------

#[test]
fn criterion_01_worked_example_exactness() {
    let pair = lambda_weights::<f64>(0.5, 0.4).unwrap();
    assert!((pair.lambda1 - 0.9).abs() < 1e-12, "lambda1 {}", pair.lambda1);
    assert!((pair.lambda2 - 0.1).abs() < 1e-12, "lambda2 {}", pair.lambda2);
    println!(
        "criterion 1 PASS: lambda_weights(0.5, 0.4) = ({}, {})",
        pair.lambda1, pair.lambda2
    );
}

#[test]
fn criterion_02_weight_identities() {
    let mut rng = rng_for(20240202);
    for i in 0..10_000 {
        let c: f64 = rng.random_range(0.0..=1.0);
        let v: f64 = rng.random_range(0.0..=0.5);
        let pair = lambda_weights(c, v).unwrap();
        assert!(
            (pair.lambda1_raw + pair.lambda2_raw - 2.0 * c).abs() < 1e-12,
            "sum identity failed at draw {i}: c={c} v={v}"
        );
        assert!(
            (pair.lambda1_raw - pair.lambda2_raw - 2.0 * v).abs() < 1e-12,
            "difference identity failed at draw {i}: c={c} v={v}"
        );
        assert!(pair.lambda1 >= pair.lambda2, "clamped ordering failed at draw {i}");
    }
    println!("criterion 2 PASS: 10000 random (c, v) pairs satisfy both identities at 1e-12");
}

#[test]
fn criterion_03_gradient_oracle() {
    fn finite_difference(
        model: &SoftmaxLinearModel<f64>,
        batch: &TrainBatch<f64>,
        l2: f64,
        step: f64,
    ) -> Vec<f64> {
        let base = model.params_flat();
        (0..base.len())
            .map(|i| {
                let mut probe = model.clone();
                let mut params = base.clone();
                params[i] = base[i] + step;
                probe.set_params_flat(&params).unwrap();
                let plus = batch_loss(&probe, batch, l2).unwrap();
                params[i] = base[i] - step;
                probe.set_params_flat(&params).unwrap();
                let minus = batch_loss(&probe, batch, l2).unwrap();
                (plus - minus) / (2.0 * step)
            })
            .collect()
    }

    let mut rng = rng_for(20240203);
    let mut worst = 0.0f64;
    for instance in 0..20 {
        let c = rng.random_range(2..=5);
        let d = rng.random_range(1..=8);
        let n = rng.random_range(1..=8);
        let model = SoftmaxLinearModel::<f64>::init(c, d, 0.5, 900 + instance);
        let examples: Vec<Example<f64>> = (0..n)
            .map(|i| Example {
                id: format!("g{i}"),
                features: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                gold_label: Some(rng.random_range(0..c)),
                text: None,
            })
            .collect();
        let labels: Vec<usize> = examples.iter().map(|e| e.gold_label.unwrap()).collect();
        let weights: Vec<f64> = (0..n)
            .map(|i| if i % 3 == 0 { 0.0 } else { rng.random_range(0.0..2.0) })
            .collect();
        let batch = TrainBatch::new(&examples, &labels, &weights).unwrap();
        let l2 = if instance % 2 == 0 { 0.0 } else { 1e-3 };
        let analytic = gradient(&model, &batch, l2).unwrap();
        let numeric = finite_difference(&model, &batch, l2, 1e-5);
        let rel = analytic
            .iter()
            .zip(&numeric)
            .map(|(&a, &b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-8))
            .fold(0.0, f64::max);
        worst = worst.max(rel);
        assert!(rel < 1e-4, "instance {instance}: relative error {rel}");
    }
    println!("criterion 3 PASS: 20 instances, max relative error {worst:.3e} < 1e-4");
}

#[test]
fn criterion_04_bundled_table_arithmetic() {
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");

    let headline = cotrain_core::eval::load_error_table_csv(&fixtures.join("headline_row.csv")).unwrap();
    let mean_err = cotrain_core::eval::mean_error(headline.method_row(0)).unwrap();
    assert!((mean_err - 23.29).abs() <= 0.005, "mean {mean_err}");

    let ablation = cotrain_core::eval::load_error_table_csv(&fixtures.join("ablation_table.csv")).unwrap();
    let ranks = cotrain_core::eval::friedman_rank(&ablation).unwrap();
    let lg = ablation.methods().iter().position(|m| m == "LG-CoTrain").unwrap();
    assert_eq!(ranks.friedman[lg], 1.0);
    assert_eq!(ranks.final_rank[lg], 1);

    let mut reader = csv::Reader::from_path(fixtures.join("pseudo_label_skew.csv")).unwrap();
    let mut yahoo_ratio = None;
    for record in reader.records() {
        let record = record.unwrap();
        if record.get(0) == Some("Yahoo") {
            let most: usize = record.get(1).unwrap().parse().unwrap();
            let least: usize = record.get(2).unwrap().parse().unwrap();
            yahoo_ratio = skew_from_counts(&[most, least]).unwrap().ratio;
        }
    }
    let ratio = yahoo_ratio.expect("fixture has a Yahoo row");
    assert!((ratio - 2.02).abs() <= 0.005, "skew {ratio}");

    println!(
        "criterion 4 PASS: mean error {mean_err:.4} ~ 23.29, Friedman rank 1.0 / final 1, skew {ratio:.4} ~ 2.02"
    );
}

#[test]
fn criterion_05_end_to_end_ordering() {
    let lg = mean(STUDY.iter().map(|s| s.lg));
    let sup = mean(STUDY.iter().map(|s| s.sup));
    let ft = mean(STUDY.iter().map(|s| s.ft));
    assert!(lg < sup, "lg-cotrain {lg:.3}% must beat sup-lb {sup:.3}%");
    assert!(lg < ft, "lg-cotrain {lg:.3}% must beat ft-ensembled {ft:.3}%");
    println!(
        "criterion 5 PASS: mean test error lg-cotrain {lg:.3}% < sup-lb {sup:.3}% and < ft-ensembled {ft:.3}%"
    );
}

#[test]
fn criterion_06_weight_separation() {
    let auc = mean(STUDY.iter().map(|s| s.auc_lambda2));
    assert!(auc >= 0.7, "mean post-warmup lambda2 AUC {auc:.4} must be >= 0.7");
    println!("criterion 6 PASS: mean post-warmup lambda2 AUC {auc:.4} >= 0.7");
}

#[test]
fn criterion_07_oracle_dominance() {
    for (seed, outcome) in STUDY_SEEDS.iter().zip(STUDY.iter()) {
        assert!(
            outcome.oracle <= outcome.lg,
            "seed {seed}: oracle {:.3}% must not exceed lg-cotrain {:.3}%",
            outcome.oracle,
            outcome.lg
        );
    }
    let oracle = mean(STUDY.iter().map(|s| s.oracle));
    let lg = mean(STUDY.iter().map(|s| s.lg));
    println!(
        "criterion 7 PASS: oracle error <= lg-cotrain error on every seed (means {oracle:.3}% vs {lg:.3}%)"
    );
}

#[test]
fn criterion_08_cmd_train_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    cotrain_cli::synth::run(&cotrain_cli::SynthArgs {
        classes: 4,
        dim: 32,
        labeled: 100,
        unlabeled: 400,
        test: 200,
        max: None,
        ir: 1.0,
        spread: STUDY_SPREAD,
        seed: 11,
        out: data_dir.clone(),
    })
    .unwrap();
    cotrain_cli::label::run(&cotrain_cli::LabelArgs {
        source: cotrain_cli::label::Source::Oracle,
        unlabeled: data_dir.join("unlabeled.jsonl"),
        gold: Some(data_dir.join("gold.jsonl")),
        rho: 0.25,
        confusion: None,
        input: None,
        template: None,
        url: None,
        header: vec![],
        retries: 2,
        response_field: "text".into(),
        parallelism: 1,
        seed: 11,
        out: data_dir.join("pseudo.jsonl"),
    })
    .unwrap();

    let train_args = |out: std::path::PathBuf| cotrain_cli::TrainArgs {
        variant: "lg-cotrain".into(),
        labeled: data_dir.join("labeled.jsonl"),
        unlabeled: data_dir.join("unlabeled.jsonl"),
        test: data_dir.join("test.jsonl"),
        pseudo: Some(data_dir.join("pseudo.jsonl")),
        gold: Some(data_dir.join("gold.jsonl")),
        validation: None,
        seed: 11,
        config: None,
        overrides: Default::default(),
        out,
    };
    let first = cotrain_cli::train::run(&train_args(dir.path().join("run-a"))).unwrap();
    let second = cotrain_cli::train::run(&train_args(dir.path().join("run-b"))).unwrap();
    let bytes_a = std::fs::read(first.run_dir.join("metrics.json")).unwrap();
    let bytes_b = std::fs::read(second.run_dir.join("metrics.json")).unwrap();
    assert_eq!(bytes_a, bytes_b, "metrics.json must be byte-identical");
    println!(
        "criterion 8 PASS: two cmd_train runs produced byte-identical metrics.json ({} bytes)",
        bytes_a.len()
    );
}

#[test]
fn criterion_09_cross_wiring_perturbation() {
    let setup = study_setup(77);
    let pool = join_pseudolabels(&setup.unlabeled, &setup.records).unwrap();
    let (half1, half2) =
        cotrain_core::data::stratified_halve(&setup.labeled, derive_seed(77, "halve")).unwrap();
    let mut config = study_config(Variant::LgCotrain, 77);
    config.warmup_epochs = 2;
    config.cotrain_epochs = 1;
    config.cotrain.learning_rate = 0.0;
    let warmup = warmup_weights(&half1, &half2, &pool, &config).unwrap();

    let baseline = {
        let mut state = CoTrainState::from_warmup(warmup.clone());
        cotrain(&mut state, &pool, &config).unwrap();
        state
    };
    let perturbed = {
        let mut state = CoTrainState::from_warmup(warmup);
        let mut shifted = ProbabilityHistory::new();
        for row in state.history2.rows() {
            shifted
                .record_epoch(row.iter().map(|&p| (p + 0.05).min(1.0)).collect())
                .unwrap();
        }
        state.history2 = shifted;
        cotrain(&mut state, &pool, &config).unwrap();
        state
    };

    assert_ne!(
        baseline.applied_log[0].model1, perturbed.applied_log[0].model1,
        "model 1's applied weights must change with model 2's history"
    );
    let identical = baseline.applied_log[0]
        .model2
        .iter()
        .zip(&perturbed.applied_log[0].model2)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    assert!(identical, "model 2's applied weights must be bit-identical");
    println!(
        "criterion 9 PASS: perturbing history 2 changed model 1's weights and left model 2's bit-identical"
    );
}

#[test]
fn criterion_10_noise_model_calibration() {
    let labels: Vec<usize> = (0..10_000).map(|i| i % 2).collect();
    let examples: Vec<Example<Real>> = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| Example {
            id: format!("n{i}"),
            features: vec![0.0],
            gold_label: Some(label),
            text: None,
        })
        .collect();
    let dataset = Dataset::new(examples, 2, 1).unwrap();
    let mut fractions = Vec::new();
    for seed in [101u64, 202, 303] {
        let records =
            simulate_oracle(&dataset, &NoiseModel::UniformFlip { rho: 0.2 }, seed).unwrap();
        let flips = records.iter().zip(&labels).filter(|(r, &g)| r.pseudo_label != g).count();
        let fraction = flips as f64 / labels.len() as f64;
        assert!(
            (0.18..=0.22).contains(&fraction),
            "seed {seed}: flip fraction {fraction} outside [0.18, 0.22]"
        );
        fractions.push(fraction);
    }
    println!(
        "criterion 10 PASS: flip fractions {:?} all within [0.18, 0.22]",
        fractions
    );
}
