//! Shared dataset/pseudo-label loading for the training commands.

use std::path::{Path, PathBuf};

use cotrain_core::data::{load_dataset, load_gold_sidecar, Dataset, DatasetFormat};
use cotrain_core::pseudolabel::{load_pseudolabels, PseudoLabelRecord};
use cotrain_core::seed::fnv1a64;
use cotrain_core::Real;

use crate::{CliError, CliResult};

pub struct LoadedInputs {
    pub labeled: Dataset<Real>,
    pub unlabeled: Dataset<Real>,
    pub test: Dataset<Real>,
    pub validation: Option<Dataset<Real>>,
    pub pseudo: Option<Vec<PseudoLabelRecord>>,
    pub digests: Vec<(String, String)>,
}

pub fn dataset(path: &Path) -> CliResult<Dataset<Real>> {
    load_dataset(path, DatasetFormat::Jsonl)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

/// Load every dataset a run needs; the gold sidecar, when given, is joined
/// onto the unlabeled pool for oracle/diagnostic use.
pub fn load_inputs(
    labeled: &Path,
    unlabeled: &Path,
    test: &Path,
    pseudo: Option<&PathBuf>,
    gold: Option<&PathBuf>,
    validation: Option<&PathBuf>,
) -> CliResult<LoadedInputs> {
    let labeled_ds = dataset(labeled)?;
    let mut unlabeled_ds = dataset(unlabeled)?;
    let test_ds = dataset(test)?;
    let mut digests = vec![
        (format!("labeled:{}", labeled.display()), file_digest(labeled)?),
        (format!("unlabeled:{}", unlabeled.display()), file_digest(unlabeled)?),
        (format!("test:{}", test.display()), file_digest(test)?),
    ];

    if let Some(gold_path) = gold {
        let sidecar = load_gold_sidecar(gold_path)
            .map_err(|e| CliError::Data(format!("{}: {e}", gold_path.display())))?;
        unlabeled_ds = unlabeled_ds.with_gold_labels(&sidecar)?;
        digests.push((format!("gold:{}", gold_path.display()), file_digest(gold_path)?));
    }

    let validation_ds = match validation {
        Some(path) => {
            digests.push((format!("validation:{}", path.display()), file_digest(path)?));
            Some(dataset(path)?)
        }
        None => None,
    };

    let pseudo_records = match pseudo {
        Some(path) => {
            let records = load_pseudolabels(path, unlabeled_ds.num_classes())
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            digests.push((format!("pseudo:{}", path.display()), file_digest(path)?));
            Some(records)
        }
        None => None,
    };

    Ok(LoadedInputs {
        labeled: labeled_ds,
        unlabeled: unlabeled_ds,
        test: test_ds,
        validation: validation_ds,
        pseudo: pseudo_records,
        digests,
    })
}
