//! Pseudo-label acquisition and diagnostics.
//!
//! Labels come from one of three sources: a precomputed JSONL file, a
//! simulated noisy oracle (the default for every test), or an HTTP
//! prompting endpoint (behind the `endpoint` feature). Whatever the source,
//! records join onto the unlabeled pool by id.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Where a pseudo-label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    File,
    Oracle,
    Endpoint,
}

/// One pseudo-labeled sample: `id -> label` plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelRecord {
    pub id: String,
    pub pseudo_label: usize,
    pub source: LabelSource,
    pub raw_response: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct PseudoLabelLine {
    id: String,
    pseudo_label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<LabelSource>,
}

/// Load pseudo-label records from JSONL; loaded records carry
/// `source = file` regardless of what the file claims.
pub fn load_pseudolabels(path: &Path, num_classes: usize) -> Result<Vec<PseudoLabelRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PseudoLabelLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if parsed.pseudo_label >= num_classes {
            return Err(Error::LabelOutOfRange { label: parsed.pseudo_label, num_classes });
        }
        records.push(PseudoLabelRecord {
            id: parsed.id,
            pseudo_label: parsed.pseudo_label,
            source: LabelSource::File,
            raw_response: None,
        });
    }
    Ok(records)
}

/// Write records as JSONL (`{"id": ..., "pseudo_label": ..., "source": ...}`).
pub fn write_pseudolabels(path: &Path, records: &[PseudoLabelRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        let line = PseudoLabelLine {
            id: r.id.clone(),
            pseudo_label: r.pseudo_label,
            source: Some(r.source),
        };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
    }
    out.flush()?;
    Ok(())
}

/// Label corruption model for the simulated oracle: either flip to a
/// uniformly random other class with probability `rho`, or draw from an
/// explicit row-stochastic confusion matrix conditioned on the gold class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    UniformFlip { rho: f64 },
    Confusion { matrix: Vec<Vec<f64>> },
}

impl NoiseModel {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        match self {
            NoiseModel::UniformFlip { rho } => {
                if !(0.0..=1.0).contains(rho) || !rho.is_finite() {
                    return Err(Error::InvalidNoiseModel("flip rate must be in [0, 1]".into()));
                }
                if *rho > 0.0 && num_classes < 2 {
                    return Err(Error::InvalidNoiseModel(
                        "flipping requires at least two classes".into(),
                    ));
                }
            }
            NoiseModel::Confusion { matrix } => {
                if matrix.len() != num_classes {
                    return Err(Error::InvalidNoiseModel(format!(
                        "confusion matrix has {} rows for {num_classes} classes",
                        matrix.len()
                    )));
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != num_classes {
                        return Err(Error::InvalidNoiseModel(format!(
                            "confusion row {i} has {} entries",
                            row.len()
                        )));
                    }
                    if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                        return Err(Error::InvalidNoiseModel(format!(
                            "confusion row {i} has a negative entry"
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidNoiseModel(format!(
                            "confusion row {i} sums to {sum}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Conditional distribution over pseudo-labels given the gold class.
    fn row(&self, gold: usize, num_classes: usize) -> Vec<f64> {
        match self {
            NoiseModel::UniformFlip { rho } => {
                if num_classes < 2 {
                    return vec![1.0];
                }
                let off = rho / (num_classes - 1) as f64;
                (0..num_classes)
                    .map(|c| if c == gold { 1.0 - rho } else { off })
                    .collect()
            }
            NoiseModel::Confusion { matrix } => matrix[gold].clone(),
        }
    }
}

/// Draw a pseudo-label per sample from the noise distribution conditioned
/// on its gold label. A pure function of `(gold dataset, noise, seed)`.
pub fn simulate_oracle<S: Scalar>(
    gold: &Dataset<S>,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<PseudoLabelRecord>> {
    let num_classes = gold.num_classes();
    noise.validate(num_classes)?;
    let labels = gold.gold_labels()?;
    let mut rng = seed::rng_for(seed::derive_seed(seed, "oracle"));
    let mut records = Vec::with_capacity(gold.len());
    for (ex, &gold_label) in gold.examples().iter().zip(&labels) {
        let row = noise.row(gold_label, num_classes);
        let mut u: f64 = rng.random();
        let mut drawn = num_classes - 1;
        for (c, &p) in row.iter().enumerate() {
            if u < p {
                drawn = c;
                break;
            }
            u -= p;
        }
        records.push(PseudoLabelRecord {
            id: ex.id.clone(),
            pseudo_label: drawn,
            source: LabelSource::Oracle,
            raw_response: None,
        });
    }
    Ok(records)
}

/// Prompt template: a string with exactly one `{input}` slot and, per
/// class, the label words to look for in a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template: String,
    pub verbalizers: Vec<Vec<String>>,
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.template.matches("{input}").count() != 1 {
            return Err(Error::InvalidTemplate(
                "template must contain exactly one {input} slot".into(),
            ));
        }
        if self.verbalizers.is_empty() {
            return Err(Error::InvalidTemplate("verbalizers must cover at least one class".into()));
        }
        let mut seen = HashSet::new();
        for (class, words) in self.verbalizers.iter().enumerate() {
            if words.is_empty() {
                return Err(Error::InvalidTemplate(format!("class {class} has no label words")));
            }
            for word in words {
                if word.trim().is_empty() {
                    return Err(Error::InvalidTemplate(format!("class {class} has a blank word")));
                }
                if !seen.insert(word.to_lowercase()) {
                    return Err(Error::InvalidTemplate(format!(
                        "label word {word:?} appears in more than one class"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.verbalizers.len()
    }

    pub fn render(&self, input: &str) -> String {
        self.template.replace("{input}", input)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let template: PromptTemplate =
            serde_json::from_reader(BufReader::new(File::open(path)?))?;
        template.validate()?;
        Ok(template)
    }
}

/// Map a labeler response to a class: case-insensitive substring scan in
/// class-index order, first class whose label word occurs wins.
pub fn extract_label(response: &str, verbalizers: &[Vec<String>]) -> Result<usize> {
    if verbalizers.is_empty() {
        return Err(Error::EmptyInput("verbalizers"));
    }
    let lowered = response.to_lowercase();
    for (class, words) in verbalizers.iter().enumerate() {
        if words.iter().any(|w| lowered.contains(&w.to_lowercase())) {
            return Ok(class);
        }
    }
    Err(Error::Unparseable(response.to_string()))
}

/// Pseudo-label frequency skew: the most and least frequent class counts
/// over all classes, and their ratio (`None` when some class never occurs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewStats {
    pub most_count: usize,
    pub least_count: usize,
    pub ratio: Option<f64>,
}

impl SkewStats {
    pub fn ratio_value(&self) -> f64 {
        self.ratio.unwrap_or(f64::INFINITY)
    }
}

/// Count pseudo-labels per class and report the skew.
pub fn skew_stats(records: &[PseudoLabelRecord], num_classes: usize) -> Result<SkewStats> {
    if records.is_empty() {
        return Err(Error::EmptyInput("skew_stats"));
    }
    let mut counts = vec![0usize; num_classes];
    for r in records {
        if r.pseudo_label >= num_classes {
            return Err(Error::LabelOutOfRange { label: r.pseudo_label, num_classes });
        }
        counts[r.pseudo_label] += 1;
    }
    skew_from_counts(&counts)
}

/// Skew from precomputed per-class counts.
pub fn skew_from_counts(counts: &[usize]) -> Result<SkewStats> {
    if counts.is_empty() {
        return Err(Error::EmptyInput("skew_from_counts"));
    }
    let most_count = *counts.iter().max().unwrap();
    let least_count = *counts.iter().min().unwrap();
    let ratio =
        (least_count > 0).then(|| most_count as f64 / least_count as f64);
    Ok(SkewStats { most_count, least_count, ratio })
}

/// The pseudo-labeled training pool: a subset of the unlabeled set joined
/// with its pseudo-labels, aligned index for index. Examples keep whatever
/// gold labels the caller attached for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabeledSet<S> {
    pub dataset: Dataset<S>,
    pub pseudo_labels: Vec<usize>,
}

impl<S: Scalar> PseudoLabeledSet<S> {
    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.dataset.examples().iter().map(|e| e.id.clone()).collect()
    }

    /// Gold labels when every joined example carries one.
    pub fn gold_labels(&self) -> Option<Vec<usize>> {
        self.dataset.gold_labels().ok()
    }
}

/// Join records onto the unlabeled pool by id. Every record id must exist
/// in the pool and may be used at most once; output order follows the pool.
pub fn join_pseudolabels<S: Scalar>(
    unlabeled: &Dataset<S>,
    records: &[PseudoLabelRecord],
) -> Result<PseudoLabeledSet<S>> {
    let index = unlabeled.id_index();
    let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(records.len());
    for r in records {
        if !index.contains_key(r.id.as_str()) {
            return Err(Error::UnknownId(r.id.clone()));
        }
        if r.pseudo_label >= unlabeled.num_classes() {
            return Err(Error::LabelOutOfRange {
                label: r.pseudo_label,
                num_classes: unlabeled.num_classes(),
            });
        }
        if by_id.insert(r.id.as_str(), r.pseudo_label).is_some() {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    let mut indices = Vec::with_capacity(records.len());
    let mut pseudo_labels = Vec::with_capacity(records.len());
    for (i, ex) in unlabeled.examples().iter().enumerate() {
        if let Some(&label) = by_id.get(ex.id.as_str()) {
            indices.push(i);
            pseudo_labels.push(label);
        }
    }
    Ok(PseudoLabeledSet { dataset: unlabeled.select(&indices), pseudo_labels })
}

#[cfg(feature = "endpoint")]
pub use endpoint::{endpoint_label, endpoint_label_all, EndpointConfig};

#[cfg(feature = "endpoint")]
mod endpoint {
    //! HTTP prompting client. One POST per example with body
    //! `{"prompt": ...}`; the response JSON is read at a configurable field
    //! path and passed through the verbalizer scan. Transport errors retry
    //! up to a configured count; unparseable responses are discarded
    //! without retrying.

    use super::*;
    use crate::data::Example;

    #[derive(Debug, Clone)]
    pub struct EndpointConfig {
        pub url: String,
        pub headers: Vec<(String, String)>,
        /// Sent as `Authorization: Bearer <token>` when present.
        pub bearer_token: Option<String>,
        /// Additional attempts after the first on transport failure.
        pub max_retries: usize,
        pub timeout_secs: u64,
        /// Dot-separated path to the response text, e.g. `text` or
        /// `choices.0.text`.
        pub response_field: String,
        /// Maximum in-flight requests for the batch driver.
        pub parallelism: usize,
    }

    impl Default for EndpointConfig {
        fn default() -> Self {
            Self {
                url: String::new(),
                headers: Vec::new(),
                bearer_token: None,
                max_retries: 2,
                timeout_secs: 30,
                response_field: "text".into(),
                parallelism: 4,
            }
        }
    }

    fn lookup_field<'a>(value: &'a serde_json::Value, path: &str) -> Option<&'a serde_json::Value> {
        let mut current = value;
        for segment in path.split('.') {
            current = match segment.parse::<usize>() {
                Ok(index) => current.get(index)?,
                Err(_) => current.get(segment)?,
            };
        }
        Some(current)
    }

    fn post_prompt(
        client: &reqwest::blocking::Client,
        config: &EndpointConfig,
        prompt: &str,
    ) -> Result<String> {
        let attempts = config.max_retries + 1;
        let mut last_message = String::new();
        for _ in 0..attempts {
            let mut request = client
                .post(&config.url)
                .json(&serde_json::json!({ "prompt": prompt }));
            for (name, value) in &config.headers {
                request = request.header(name, value);
            }
            if let Some(token) = &config.bearer_token {
                request = request.header("Authorization", format!("Bearer {token}"));
            }
            match request.send() {
                Err(e) => last_message = e.to_string(),
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        return Ok(response
                            .text()
                            .map_err(|e| Error::MalformedResponse(e.to_string()))?);
                    }
                    last_message = format!("HTTP {status}");
                }
            }
        }
        Err(Error::Transport { attempts, message: last_message })
    }

    /// Label one example via the endpoint. `Ok(None)` means the response
    /// carried no recognizable label word and the sample is discarded.
    pub fn endpoint_label<S: Scalar>(
        config: &EndpointConfig,
        template: &PromptTemplate,
        example: &Example<S>,
    ) -> Result<Option<PseudoLabelRecord>> {
        template.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Transport { attempts: 0, message: e.to_string() })?;
        label_with_client(&client, config, template, example)
    }

    fn label_with_client<S: Scalar>(
        client: &reqwest::blocking::Client,
        config: &EndpointConfig,
        template: &PromptTemplate,
        example: &Example<S>,
    ) -> Result<Option<PseudoLabelRecord>> {
        let text = example
            .text
            .as_deref()
            .ok_or_else(|| Error::MissingInput(format!("example {:?} has no text", example.id)))?;
        let body = post_prompt(client, config, &template.render(text))?;
        let value: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| Error::MalformedResponse(e.to_string()))?;
        let field = lookup_field(&value, &config.response_field).ok_or_else(|| {
            Error::MalformedResponse(format!("missing field {:?}", config.response_field))
        })?;
        let response_text = field.as_str().ok_or_else(|| {
            Error::MalformedResponse(format!("field {:?} is not a string", config.response_field))
        })?;
        match extract_label(response_text, &template.verbalizers) {
            Ok(label) => Ok(Some(PseudoLabelRecord {
                id: example.id.clone(),
                pseudo_label: label,
                source: LabelSource::Endpoint,
                raw_response: Some(response_text.to_string()),
            })),
            Err(Error::Unparseable(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Label a batch with bounded parallelism. Output order equals input
    /// order regardless of completion order; `None` entries were discarded
    /// as unparseable.
    pub fn endpoint_label_all<S: Scalar>(
        config: &EndpointConfig,
        template: &PromptTemplate,
        examples: &[Example<S>],
    ) -> Result<Vec<Option<PseudoLabelRecord>>> {
        template.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Transport { attempts: 0, message: e.to_string() })?;
        let workers = config.parallelism.max(1).min(examples.len().max(1));
        let mut chunks: Vec<Vec<(usize, Result<Option<PseudoLabelRecord>>)>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|worker| {
                        let client = client.clone();
                        scope.spawn(move || {
                            let mut results = Vec::new();
                            for (i, example) in examples.iter().enumerate() {
                                if i % workers == worker {
                                    results.push((
                                        i,
                                        label_with_client(&client, config, template, example),
                                    ));
                                }
                            }
                            results
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("labeling worker panicked")).collect()
            });
        let mut ordered: Vec<Option<Result<Option<PseudoLabelRecord>>>> =
            (0..examples.len()).map(|_| None).collect();
        for chunk in chunks.drain(..) {
            for (i, result) in chunk {
                ordered[i] = Some(result);
            }
        }
        ordered.into_iter().map(|slot| slot.expect("every index labeled")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    fn letters_dataset(labels: &[usize], num_classes: usize) -> Dataset<f64> {
        let examples = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| crate::data::Example {
                id: format!("u{i}"),
                features: vec![0.0, 1.0],
                gold_label: Some(label),
                text: None,
            })
            .collect();
        Dataset::new(examples, num_classes, 2).unwrap()
    }

    #[test]
    fn load_empty_file_is_empty() {
        let file = tempfile::NamedTempFile::new().unwrap();
        assert!(load_pseudolabels(file.path(), 3).unwrap().is_empty());
    }

    #[test]
    fn load_sets_source_to_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{{\"id\": \"a\", \"pseudo_label\": 0, \"source\": \"oracle\"}}").unwrap();
        writeln!(file, "{{\"id\": \"b\", \"pseudo_label\": 1}}").unwrap();
        let records = load_pseudolabels(file.path(), 2).unwrap();
        assert_eq!(records.len(), 2);
        assert!(records.iter().all(|r| r.source == LabelSource::File));
    }

    #[test]
    fn load_rejects_label_equal_to_class_count() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{{\"id\": \"a\", \"pseudo_label\": 2}}").unwrap();
        let err = load_pseudolabels(file.path(), 2).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { label: 2, num_classes: 2 }));
    }

    #[test]
    fn pseudolabel_file_round_trip() {
        let records = vec![
            PseudoLabelRecord {
                id: "a".into(),
                pseudo_label: 1,
                source: LabelSource::Oracle,
                raw_response: None,
            },
            PseudoLabelRecord {
                id: "b".into(),
                pseudo_label: 0,
                source: LabelSource::Oracle,
                raw_response: None,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pseudo.jsonl");
        write_pseudolabels(&path, &records).unwrap();
        let loaded = load_pseudolabels(&path, 2).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].pseudo_label, 1);
        assert_eq!(loaded[1].id, "b");
    }

    #[test]
    fn oracle_with_zero_noise_copies_gold() {
        let ds = letters_dataset(&[0, 1, 1, 0], 2);
        let records = simulate_oracle(&ds, &NoiseModel::UniformFlip { rho: 0.0 }, 7).unwrap();
        let labels: Vec<usize> = records.iter().map(|r| r.pseudo_label).collect();
        assert_eq!(labels, vec![0, 1, 1, 0]);
        assert!(records.iter().all(|r| r.source == LabelSource::Oracle));
    }

    #[test]
    fn oracle_with_identity_confusion_copies_gold() {
        let ds = letters_dataset(&[0, 1, 1, 0], 2);
        let identity = NoiseModel::Confusion { matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]] };
        let records = simulate_oracle(&ds, &identity, 7).unwrap();
        let labels: Vec<usize> = records.iter().map(|r| r.pseudo_label).collect();
        assert_eq!(labels, vec![0, 1, 1, 0]);
    }

    #[test]
    fn oracle_flip_fraction_matches_rate() {
        // 99.99% binomial interval at rho = 0.2, n = 10_000 is within
        // [0.18, 0.22]; a fixed seed keeps this deterministic.
        let labels: Vec<usize> = (0..10_000).map(|i| i % 2).collect();
        let ds = letters_dataset(&labels, 2);
        for seed in [1u64, 2, 3] {
            let records =
                simulate_oracle(&ds, &NoiseModel::UniformFlip { rho: 0.2 }, seed).unwrap();
            let flips = records
                .iter()
                .zip(&labels)
                .filter(|(r, &g)| r.pseudo_label != g)
                .count();
            let fraction = flips as f64 / labels.len() as f64;
            assert!(
                (0.18..=0.22).contains(&fraction),
                "seed {seed}: flip fraction {fraction}"
            );
        }
    }

    #[test]
    fn oracle_is_deterministic() {
        let ds = letters_dataset(&[0, 1, 0, 1, 0, 1], 2);
        let noise = NoiseModel::UniformFlip { rho: 0.5 };
        assert_eq!(
            simulate_oracle(&ds, &noise, 11).unwrap(),
            simulate_oracle(&ds, &noise, 11).unwrap()
        );
    }

    #[test]
    fn oracle_marginals_follow_confusion() {
        let labels: Vec<usize> = (0..10_000).map(|i| i % 2).collect();
        let ds = letters_dataset(&labels, 2);
        let noise = NoiseModel::Confusion { matrix: vec![vec![0.7, 0.3], vec![0.2, 0.8]] };
        let records = simulate_oracle(&ds, &noise, 5).unwrap();
        let class0 =
            records.iter().filter(|r| r.pseudo_label == 0).count() as f64 / records.len() as f64;
        // gold^T . confusion = (0.5*0.7 + 0.5*0.2, ...) = (0.45, 0.55)
        assert!((class0 - 0.45).abs() < 0.02, "marginal {class0}");
    }

    #[test]
    fn oracle_rejects_invalid_noise() {
        let ds = letters_dataset(&[0, 1], 2);
        assert!(simulate_oracle(&ds, &NoiseModel::UniformFlip { rho: 1.5 }, 0).is_err());
        let bad_rows = NoiseModel::Confusion { matrix: vec![vec![0.9, 0.2], vec![0.0, 1.0]] };
        assert!(simulate_oracle(&ds, &bad_rows, 0).is_err());
        let negative = NoiseModel::Confusion { matrix: vec![vec![1.2, -0.2], vec![0.0, 1.0]] };
        assert!(simulate_oracle(&ds, &negative, 0).is_err());
    }

    fn ag_news_verbalizers() -> Vec<Vec<String>> {
        vec![
            vec!["world".into()],
            vec!["sports".into()],
            vec!["business".into()],
            vec!["science".into(), "technology".into(), "sci/tech".into()],
        ]
    }

    #[test]
    fn extract_exact_match() {
        let verbalizers = vec![vec!["positive".to_string()], vec!["negative".to_string()]];
        assert_eq!(extract_label("Positive", &verbalizers).unwrap(), 0);
    }

    #[test]
    fn extract_substring_scan() {
        assert_eq!(
            extract_label("I think it is Sports.", &ag_news_verbalizers()).unwrap(),
            1
        );
        assert_eq!(
            extract_label("World news, definitely", &ag_news_verbalizers()).unwrap(),
            0
        );
    }

    #[test]
    fn extract_unmatched_is_unparseable() {
        let verbalizers = vec![vec!["positive".to_string()], vec!["negative".to_string()]];
        assert!(matches!(
            extract_label("maybe", &verbalizers),
            Err(Error::Unparseable(_))
        ));
    }

    #[test]
    fn extract_is_case_insensitive() {
        let verbalizers = ag_news_verbalizers();
        assert_eq!(
            extract_label("BUSINESS as usual", &verbalizers).unwrap(),
            extract_label("business as usual", &verbalizers).unwrap()
        );
    }

    #[test]
    fn template_validation() {
        let good = PromptTemplate {
            template: "Classify: {input}. Answer:".into(),
            verbalizers: vec![vec!["a".into()], vec!["b".into()]],
        };
        good.validate().unwrap();
        let no_slot = PromptTemplate { template: "Classify".into(), ..good.clone() };
        assert!(no_slot.validate().is_err());
        let two_slots =
            PromptTemplate { template: "{input} {input}".into(), ..good.clone() };
        assert!(two_slots.validate().is_err());
        let duplicate_word = PromptTemplate {
            verbalizers: vec![vec!["a".into()], vec!["A".into()]],
            ..good
        };
        assert!(duplicate_word.validate().is_err());
    }

    #[test]
    fn template_render_fills_slot() {
        let t = PromptTemplate {
            template: "Review: {input}. Positive or negative?".into(),
            verbalizers: vec![vec!["positive".into()], vec!["negative".into()]],
        };
        assert_eq!(t.render("great"), "Review: great. Positive or negative?");
    }

    #[test]
    fn skew_hand_cases() {
        let stats = skew_from_counts(&[6, 3]).unwrap();
        assert_eq!(stats.most_count, 6);
        assert_eq!(stats.least_count, 3);
        assert_eq!(stats.ratio, Some(2.0));

        let balanced = skew_from_counts(&[5, 5, 5]).unwrap();
        assert_eq!(balanced.ratio, Some(1.0));

        let degenerate = skew_from_counts(&[4, 0]).unwrap();
        assert_eq!(degenerate.ratio, None);
        assert!(degenerate.ratio_value().is_infinite());
    }

    #[test]
    fn skew_yahoo_fixture() {
        let stats = skew_from_counts(&[63_659, 31_465]).unwrap();
        let ratio = stats.ratio.unwrap();
        assert!((ratio - 2.02).abs() < 0.005, "ratio {ratio}");
    }

    #[test]
    fn skew_rejects_empty() {
        assert!(matches!(skew_stats(&[], 2), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn join_preserves_each_example_at_most_once() {
        let ds = letters_dataset(&[0, 1, 0], 2);
        let records = vec![
            PseudoLabelRecord {
                id: "u2".into(),
                pseudo_label: 1,
                source: LabelSource::File,
                raw_response: None,
            },
            PseudoLabelRecord {
                id: "u0".into(),
                pseudo_label: 0,
                source: LabelSource::File,
                raw_response: None,
            },
        ];
        let joined = join_pseudolabels(&ds, &records).unwrap();
        assert_eq!(joined.len(), 2);
        // Pool order, not record order.
        assert_eq!(joined.ids(), vec!["u0".to_string(), "u2".to_string()]);
        assert_eq!(joined.pseudo_labels, vec![0, 1]);
    }

    #[test]
    fn join_rejects_unknown_and_duplicate_ids() {
        let ds = letters_dataset(&[0, 1], 2);
        let unknown = vec![PseudoLabelRecord {
            id: "nope".into(),
            pseudo_label: 0,
            source: LabelSource::File,
            raw_response: None,
        }];
        assert!(matches!(join_pseudolabels(&ds, &unknown), Err(Error::UnknownId(_))));
        let duplicated = vec![
            PseudoLabelRecord {
                id: "u0".into(),
                pseudo_label: 0,
                source: LabelSource::File,
                raw_response: None,
            },
            PseudoLabelRecord {
                id: "u0".into(),
                pseudo_label: 1,
                source: LabelSource::File,
                raw_response: None,
            },
        ];
        assert!(matches!(join_pseudolabels(&ds, &duplicated), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn bundled_prompt_templates_are_valid() {
        let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("fixtures")
            .join("prompts");
        let expected_classes =
            [("ag_news", 4), ("imdb", 2), ("yahoo", 10), ("amazon", 5), ("yelp", 5)];
        for (name, classes) in expected_classes {
            let template = PromptTemplate::load(&dir.join(format!("{name}.json")))
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(template.num_classes(), classes, "{name}");
        }
        let imdb = PromptTemplate::load(&dir.join("imdb.json")).unwrap();
        assert_eq!(extract_label("definitely Negative", &imdb.verbalizers).unwrap(), 1);
        assert!(imdb.render("great film").contains("great film"));
    }

    #[test]
    fn oracle_over_synthetic_dataset_stays_in_range() {
        let spec = SyntheticSpec {
            num_classes: 4,
            feature_dim: 4,
            samples_per_class_max: 50,
            imbalance_ratio: 2.0,
            cluster_spread: 0.4,
            seed: 3,
        };
        let ds: Dataset<f64> = generate_synthetic(&spec).unwrap();
        let records = simulate_oracle(&ds, &NoiseModel::UniformFlip { rho: 0.4 }, 9).unwrap();
        assert!(records.iter().all(|r| r.pseudo_label < 4));
        let stats = skew_stats(&records, 4).unwrap();
        assert!(stats.most_count >= stats.least_count);
    }
}
